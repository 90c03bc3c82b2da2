#pragma once

// Observation models with a density jump at the support boundary.
//
//   parametric_shift_exp:  p_theta(x)     = lambda exp(-lambda (x - theta)),  x >= theta
//   semiparam_shift:       p_theta,eta(x) = eta(x - theta),                   x >= theta
//   semiparam_scale:       p_theta,eta(x) = eta(x / theta) / theta,           0 <= x <= theta
//
// The local parameter is h = n (theta - theta0). Shift-type models have the
// likelihood boundary on the right of h (h <= Delta_n), the scale model on the
// left (h >= Delta_n).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "laebvm/nuisance.hpp"
#include "laebvm/random.hpp"

namespace laebvm {

enum class ModelKind { parametric_shift_exp, semiparam_shift, semiparam_scale };

/// Side of the hard boundary in h: negative = support (-inf, Delta_n],
/// positive = [Delta_n, inf).
enum class Orientation { negative, positive };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::parametric_shift_exp: return "parametric_shift_exp";
        case ModelKind::semiparam_shift: return "semiparam_shift";
        case ModelKind::semiparam_scale: return "semiparam_scale";
    }
    return "?";
}

inline const char* to_string(Orientation o) {
    return o == Orientation::negative ? "negative" : "positive";
}

struct ModelSpec {
    ModelKind kind = ModelKind::parametric_shift_exp;
    double theta0 = 0.0;
    std::optional<NuisanceDensity> eta0;
    double lambda = 1.0;

    static ModelSpec parametric(double lambda, double theta0 = 0.0) {
        ModelSpec s;
        s.kind = ModelKind::parametric_shift_exp;
        s.lambda = lambda;
        s.theta0 = theta0;
        s.validate();
        return s;
    }

    static ModelSpec shift(NuisanceDensity eta0, double theta0 = 0.0) {
        ModelSpec s;
        s.kind = ModelKind::semiparam_shift;
        s.theta0 = theta0;
        s.eta0 = std::move(eta0);
        s.lambda = 0.0;
        s.validate();
        return s;
    }

    static ModelSpec scale(NuisanceDensity eta0, double theta0) {
        ModelSpec s;
        s.kind = ModelKind::semiparam_scale;
        s.theta0 = theta0;
        s.eta0 = std::move(eta0);
        s.lambda = 0.0;
        s.validate();
        return s;
    }

    void validate() const {
        if (!std::isfinite(theta0)) throw std::invalid_argument("ModelSpec: theta0 not finite");
        switch (kind) {
            case ModelKind::parametric_shift_exp:
                if (!(lambda > 0.0) || !std::isfinite(lambda)) {
                    throw std::invalid_argument("ModelSpec: lambda must be positive");
                }
                break;
            case ModelKind::semiparam_shift:
                if (!eta0 || eta0->kind() != DensityKind::shift) {
                    throw std::invalid_argument("ModelSpec: shift model needs a shift-kind eta0");
                }
                break;
            case ModelKind::semiparam_scale:
                if (!(theta0 > 0.0)) throw std::invalid_argument("ModelSpec: scale needs theta0 > 0");
                if (!eta0 || eta0->kind() != DensityKind::scale) {
                    throw std::invalid_argument("ModelSpec: scale model needs a scale-kind eta0");
                }
                break;
        }
    }

    [[nodiscard]] bool is_semiparametric() const {
        return kind != ModelKind::parametric_shift_exp;
    }

    [[nodiscard]] Orientation orientation() const {
        return kind == ModelKind::semiparam_scale ? Orientation::positive : Orientation::negative;
    }

    /// eta to use when the caller passes none: eta0 (nullptr for parametric).
    [[nodiscard]] const NuisanceDensity* resolve(const NuisanceDensity* eta) const {
        return eta != nullptr ? eta : (eta0 ? &*eta0 : nullptr);
    }

    [[nodiscard]] double theta_at(double h, std::size_t n) const {
        return theta0 + h / static_cast<double>(n);
    }
};

struct Dataset {
    std::vector<double> x;
    double min = kInf;
    double max = kNegInf;
    std::uint64_t seed = 0;

    static Dataset from(std::vector<double> values, std::uint64_t seed = 0) {
        if (values.empty()) throw std::invalid_argument("Dataset: empty");
        Dataset d;
        d.x = std::move(values);
        const auto [lo, hi] = std::minmax_element(d.x.begin(), d.x.end());
        d.min = *lo;
        d.max = *hi;
        d.seed = seed;
        return d;
    }

    [[nodiscard]] std::size_t n() const noexcept { return x.size(); }
};

struct LaeQuantities {
    double delta_n = 0.0;
    double gamma = 0.0;
};

/// Jump size gamma_{theta0,eta}: lambda, eta(0), or eta(1) / theta0.
inline double jump_rate(const ModelSpec& spec, const NuisanceDensity* eta) {
    switch (spec.kind) {
        case ModelKind::parametric_shift_exp: return spec.lambda;
        case ModelKind::semiparam_shift: return spec.resolve(eta)->jump_at_zero();
        case ModelKind::semiparam_scale: return spec.resolve(eta)->jump_at_one() / spec.theta0;
    }
    return 0.0;
}

/// log p_{theta,eta}(x); -inf outside the support.
inline double model_log_density(const ModelSpec& spec, double theta, const NuisanceDensity* eta,
                                double x) {
    switch (spec.kind) {
        case ModelKind::parametric_shift_exp:
            if (x < theta) return kNegInf;
            return std::log(spec.lambda) - spec.lambda * (x - theta);
        case ModelKind::semiparam_shift:
            if (x < theta) return kNegInf;
            return spec.resolve(eta)->log_density(x - theta);
        case ModelKind::semiparam_scale:
            if (!(theta > 0.0) || x < 0.0 || x > theta) return kNegInf;
            return spec.resolve(eta)->log_density(x / theta) - std::log(theta);
    }
    return kNegInf;
}

/// True when every observation lies in the support of p_{theta, .}.
inline bool in_support(const ModelSpec& spec, double theta, const Dataset& data) {
    if (spec.kind == ModelKind::semiparam_scale) return theta > 0.0 && data.max <= theta;
    return data.min >= theta;
}

/// sum_i log p_{theta,eta}(X_i) - log p_{theta0,eta0}(X_i); -inf when any X_i
/// falls outside the support of p_{theta,eta}.
inline double log_lik_ratio(const ModelSpec& spec, double theta, const NuisanceDensity* eta,
                            const Dataset& data) {
    if (!in_support(spec, theta, data)) return kNegInf;
    if (spec.kind == ModelKind::parametric_shift_exp) {
        return static_cast<double>(data.n()) * spec.lambda * (theta - spec.theta0);
    }
    const NuisanceDensity* e = spec.resolve(eta);
    double sum = 0.0;
    for (const double xi : data.x) {
        sum += model_log_density(spec, theta, e, xi) -
               model_log_density(spec, spec.theta0, nullptr, xi);
    }
    return sum;
}

inline LaeQuantities lae_quantities(const ModelSpec& spec, const Dataset& data) {
    const auto n = static_cast<double>(data.n());
    LaeQuantities q;
    if (spec.kind == ModelKind::semiparam_scale) {
        const double nabla = n * (spec.theta0 - data.max);
        q.delta_n = -nabla;
    } else {
        q.delta_n = n * (data.min - spec.theta0);
    }
    q.gamma = jump_rate(spec, nullptr);
    return q;
}

/// R_n(h) = log prod p_{theta_n(h),eta} / p_{theta0,eta} -/+ h gamma_{theta0,eta}
/// (minus for shift-type, plus for scale). Empty when h is on the wrong side
/// of Delta_n, i.e. the likelihood ratio vanishes.
inline std::optional<double> lae_remainder(const ModelSpec& spec, double h,
                                           const NuisanceDensity* eta, const Dataset& data) {
    const NuisanceDensity* e = spec.resolve(eta);
    const double theta = spec.theta_at(h, data.n());
    if (!in_support(spec, theta, data)) return std::nullopt;
    double llr = 0.0;
    if (spec.kind == ModelKind::parametric_shift_exp) {
        llr = static_cast<double>(data.n()) * spec.lambda * (theta - spec.theta0);
    } else {
        for (const double xi : data.x) {
            llr += model_log_density(spec, theta, e, xi) -
                   model_log_density(spec, spec.theta0, e, xi);
        }
    }
    const double gamma = jump_rate(spec, e);
    const double sign = spec.orientation() == Orientation::negative ? 1.0 : -1.0;
    return llr - sign * h * gamma;
}

struct PointEstimates {
    double theta_hat = 0.0;
    double theta_tilde = 0.0;
    /// Set for the scale model, whose de-biased value is a convention.
    bool debiased_is_experimental = false;
};

/// Maximum likelihood estimate and its de-biased version. Shift-type:
/// X_(1) and X_(1) - 1/(n gamma). Scale: X_(n) and X_(n) + 1/(n gamma_hat)
/// with the plug-in gamma_hat = eta0(1) / X_(n).
inline PointEstimates mle_and_debiased(const ModelSpec& spec, const Dataset& data) {
    const auto n = static_cast<double>(data.n());
    PointEstimates est;
    if (spec.kind == ModelKind::semiparam_scale) {
        const double gamma_hat = spec.eta0->jump_at_one() / data.max;
        est.theta_hat = data.max;
        est.theta_tilde = data.max + 1.0 / (n * gamma_hat);
        est.debiased_is_experimental = true;
    } else {
        est.theta_hat = data.min;
        est.theta_tilde = data.min - 1.0 / (n * lae_quantities(spec, data).gamma);
    }
    return est;
}

/// Inverse-CDF sampler for a nuisance density: cumulative table on 4097 nodes
/// (uniform in the compactified coordinate), bisection for the cell, then
/// safeguarded Newton on the exact within-cell mass.
class QuantileTable {
public:
    static constexpr std::size_t kNodes = 4097;

    explicit QuantileTable(const NuisanceDensity& eta) : eta_(&eta) {
        nodes_.resize(kNodes);
        cdf_.assign(kNodes, 0.0);
        const bool shift = eta.kind() == DensityKind::shift;
        for (std::size_t j = 0; j < kNodes; ++j) {
            const double u = static_cast<double>(j) / static_cast<double>(kNodes - 1);
            nodes_[j] = shift ? psi_inverse(u) : u;
        }
        nodes_.front() = 0.0;
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < kNodes; ++j) {
            if (std::isinf(nodes_[j + 1])) {
                // Remaining half-line mass: whatever the normalizer left over.
                acc = std::max(acc, 1.0);
            } else {
                acc += eta.mass(nodes_[j], nodes_[j + 1]);
            }
            cdf_[j + 1] = acc;
        }
        total_ = acc;
    }

    [[nodiscard]] double quantile(double p) const {
        const double target = p * total_;
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t j = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
        j = std::min(j, kNodes - 2);
        double lo = nodes_[j];
        double hi = nodes_[j + 1];
        const double r = target - cdf_[j];
        if (std::isinf(hi)) {
            // Beyond the last finite node the density is effectively a pure
            // exponential at the local rate.
            const double rate = -eta_->log_derivative(lo);
            const double rest = std::max(total_ - cdf_[j], 1e-300);
            const double frac = std::clamp(r / rest, 0.0, 1.0 - 1e-16);
            return lo - std::log1p(-frac) / rate;
        }
        const double cell_mass = cdf_[j + 1] - cdf_[j];
        // Start from the exponential through the cell's end-point densities.
        const double f_lo = eta_->density(lo);
        const double rate = std::log(eta_->density(hi) / f_lo) / (hi - lo);
        double x = std::abs(rate * (hi - lo)) < 1e-8
                       ? lo + r / f_lo
                       : lo + std::log1p(rate * r / f_lo) / rate;
        if (!(x > lo && x < hi)) x = lo + (hi - lo) * std::clamp(r / cell_mass, 0.0, 1.0);
        for (int iter = 0; iter < 60; ++iter) {
            const double g = eta_->mass(nodes_[j], x) - r;
            if (g > 0.0) {
                hi = x;
            } else {
                lo = x;
            }
            const double step = g / eta_->density(x);
            const double scale = 1e-14 * std::max(1.0, std::abs(x));
            if (std::abs(step) <= scale) {
                x -= step;
                break;
            }
            double next = x - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            x = next;
            if (hi - lo <= scale) break;
        }
        return x;
    }

private:
    const NuisanceDensity* eta_;
    std::vector<double> nodes_;
    std::vector<double> cdf_;
    double total_ = 1.0;
};

/// n i.i.d. draws from p_{theta,eta}; bit-identical for equal seeds.
inline Dataset sample(const ModelSpec& spec, double theta, const NuisanceDensity* eta,
                      std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample: n must be positive");
    if (!std::isfinite(theta)) throw std::invalid_argument("sample: theta not finite");
    if (spec.kind == ModelKind::semiparam_scale && !(theta > 0.0)) {
        throw std::invalid_argument("sample: scale model needs theta > 0");
    }
    Engine rng(seed);
    std::vector<double> x(n);
    if (spec.kind == ModelKind::parametric_shift_exp) {
        for (auto& xi : x) xi = theta - std::log(uniform_open(rng)) / spec.lambda;
        return Dataset::from(std::move(x), seed);
    }
    const NuisanceDensity* e = spec.resolve(eta);
    if ((spec.kind == ModelKind::semiparam_shift) != (e->kind() == DensityKind::shift)) {
        throw std::invalid_argument("sample: nuisance kind does not match the model");
    }
    const QuantileTable table(*e);
    for (auto& xi : x) {
        const double z = table.quantile(uniform_open(rng));
        xi = spec.kind == ModelKind::semiparam_shift ? theta + z : theta * z;
    }
    return Dataset::from(std::move(x), seed);
}

}  // namespace laebvm
