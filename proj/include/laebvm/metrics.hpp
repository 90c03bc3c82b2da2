#pragma once

// Hellinger and Kullback-Leibler diagnostics for the boundary models.
//
// H(P, Q) = ( int (sqrt p - sqrt q)^2 )^{1/2}, so 0 <= H <= sqrt 2. All
// quadratures split at support endpoints and score-grid nodes, where the
// integrands are not smooth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "laebvm/models.hpp"
#include "laebvm/quadrature.hpp"

namespace laebvm {

/// A density given by its logarithm (-inf outside [lo, hi]) plus points where
/// it may fail to be smooth.
struct SupportedDensity {
    std::function<double(double)> log_pdf;
    double lo = 0.0;
    double hi = kInf;
    std::vector<double> breaks;

    [[nodiscard]] double pdf(double x) const {
        if (x < lo || x > hi) return 0.0;
        return std::exp(log_pdf(x));
    }
    [[nodiscard]] double sqrt_pdf(double x) const {
        if (x < lo || x > hi) return 0.0;
        return std::exp(0.5 * log_pdf(x));
    }
};

struct DistPair {
    SupportedDensity p;
    SupportedDensity q;
};

namespace detail {

inline std::vector<double> merged_breaks(const DistPair& pair) {
    std::vector<double> b = pair.p.breaks;
    b.insert(b.end(), pair.q.breaks.begin(), pair.q.breaks.end());
    for (const double v : {pair.p.lo, pair.p.hi, pair.q.lo, pair.q.hi}) {
        if (std::isfinite(v)) b.push_back(v);
    }
    return b;
}

inline quad::AdaptiveOptions metric_tolerance() { return {1e-15, 1e-11, 2000}; }

}  // namespace detail

/// int (sqrt p - sqrt q)^2 over the union of the supports.
inline double hellinger_squared(const DistPair& pair) {
    const double a = std::min(pair.p.lo, pair.q.lo);
    const double b = std::max(pair.p.hi, pair.q.hi);
    auto f = [&pair](double x) {
        const double d = pair.p.sqrt_pdf(x) - pair.q.sqrt_pdf(x);
        return d * d;
    };
    return quad::integrate_piecewise(f, a, b, detail::merged_breaks(pair),
                                     detail::metric_tolerance());
}

inline double hellinger(const DistPair& pair) {
    return std::sqrt(std::clamp(hellinger_squared(pair), 0.0, 2.0));
}

/// int sqrt(p q) over the intersection of the supports.
inline double affinity(const DistPair& pair) {
    const double a = std::max(pair.p.lo, pair.q.lo);
    const double b = std::min(pair.p.hi, pair.q.hi);
    if (!(b > a)) return 0.0;
    auto f = [&pair](double x) { return pair.p.sqrt_pdf(x) * pair.q.sqrt_pdf(x); };
    return quad::integrate_piecewise(f, a, b, detail::merged_breaks(pair),
                                     detail::metric_tolerance());
}

/// p_{theta,eta} as a SupportedDensity (eta = nullptr means eta0).
inline SupportedDensity model_density(const ModelSpec& spec, double theta,
                                      const NuisanceDensity* eta) {
    SupportedDensity d;
    const NuisanceDensity* e = spec.resolve(eta);
    d.log_pdf = [sp = std::make_shared<const ModelSpec>(spec), theta, e](double x) {
        return model_log_density(*sp, theta, e, x);
    };
    switch (spec.kind) {
        case ModelKind::parametric_shift_exp:
            d.lo = theta;
            d.hi = kInf;
            break;
        case ModelKind::semiparam_shift:
            d.lo = theta;
            d.hi = kInf;
            for (const double t : e->nodes()) {
                if (std::isfinite(t)) d.breaks.push_back(theta + t);
            }
            break;
        case ModelKind::semiparam_scale:
            d.lo = 0.0;
            d.hi = theta;
            for (const double t : e->nodes()) d.breaks.push_back(theta * t);
            break;
    }
    return d;
}

/// (P_{theta_a,eta_a}, P_{theta_b,eta_b}). The nuisance densities must outlive the pair.
inline DistPair model_pair(const ModelSpec& spec, double theta_a, const NuisanceDensity* eta_a,
                           double theta_b, const NuisanceDensity* eta_b) {
    return {model_density(spec, theta_a, eta_a), model_density(spec, theta_b, eta_b)};
}

/// d_H(eta1, eta2) = H(P_{theta0,eta1}, P_{theta0,eta2}).
inline double d_H_nuisance(const NuisanceDensity& eta1, const NuisanceDensity& eta2,
                           double theta0, DensityKind kind) {
    if (eta1.kind() != kind || eta2.kind() != kind) {
        throw std::invalid_argument("d_H_nuisance: densities must share the given kind");
    }
    const ModelSpec spec = kind == DensityKind::shift ? ModelSpec::shift(eta1, theta0)
                                                      : ModelSpec::scale(eta1, theta0);
    return hellinger(model_pair(spec, theta0, &eta1, theta0, &eta2));
}

// ---------------------------------------------------------------------------
// sqrt(n) H(P_{theta0 + h/n, eta}, P_{theta0, eta}) across n.

struct HellingerRateRow {
    std::size_t n = 0;
    double max_scaled = 0.0;   // max over draws
    double mean_scaled = 0.0;
    /// sqrt(n) * H for the parametric model in closed form (NaN otherwise).
    double closed_form = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> per_draw;
};

struct HellingerRateReport {
    double h = 0.0;
    std::vector<HellingerRateRow> rows;
    /// max_scaled at the last n relative to the first, minus one.
    double growth = 0.0;
    double threshold = 0.10;
    bool bounded = true;
};

/// Closed form of sqrt(n) H for shifted exponentials: H^2 = 2 (1 - exp(-lambda |h| / (2n))).
inline double parametric_scaled_hellinger(double lambda, double h, std::size_t n) {
    const double nd = static_cast<double>(n);
    return std::sqrt(nd * 2.0 * -std::expm1(-lambda * std::abs(h) / (2.0 * nd)));
}

inline HellingerRateReport hellinger_rate_check(const ModelSpec& spec,
                                                std::span<const NuisanceDensity> eta_draws,
                                                double h, const std::vector<std::size_t>& n_list,
                                                double threshold = 0.10) {
    if (n_list.empty()) throw std::invalid_argument("hellinger_rate_check: empty n_list");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        if (n_list[i] <= n_list[i - 1]) {
            throw std::invalid_argument("hellinger_rate_check: n_list must increase");
        }
    }
    if (spec.is_semiparametric() && eta_draws.empty()) {
        throw std::invalid_argument("hellinger_rate_check: no nuisance draws");
    }
    HellingerRateReport report;
    report.h = h;
    report.threshold = threshold;
    for (const std::size_t n : n_list) {
        HellingerRateRow row;
        row.n = n;
        const double theta = spec.theta_at(h, n);
        const double root_n = std::sqrt(static_cast<double>(n));
        if (!spec.is_semiparametric()) {
            row.per_draw.push_back(root_n * hellinger(model_pair(spec, theta, nullptr, spec.theta0,
                                                                 nullptr)));
            row.closed_form = parametric_scaled_hellinger(spec.lambda, h, n);
        } else {
            for (const auto& eta : eta_draws) {
                row.per_draw.push_back(
                    root_n * hellinger(model_pair(spec, theta, &eta, spec.theta0, &eta)));
            }
        }
        row.max_scaled = *std::max_element(row.per_draw.begin(), row.per_draw.end());
        double s = 0.0;
        for (const double v : row.per_draw) s += v;
        row.mean_scaled = s / static_cast<double>(row.per_draw.size());
        report.rows.push_back(std::move(row));
    }
    const double first = report.rows.front().max_scaled;
    const double last = report.rows.back().max_scaled;
    report.growth = first > 0.0 ? last / first - 1.0 : (last > 0.0 ? kInf : 0.0);
    report.bounded = report.growth < threshold;
    return report;
}

/// Upper bound on H^2(P_{theta0 + h/n, eta}, P_{theta0, eta}) for |h| <= M in the
/// shift model: 2 gamma M/n + (M/n)^2 int|eta'| + (M/n)^2 I(eta) / 4, where I is
/// the location Fisher information int (eta')^2 / eta.
struct ShiftHellingerBound {
    double gamma = 0.0;
    double abs_derivative_integral = 0.0;
    double fisher = 0.0;
    [[nodiscard]] double squared(double M, std::size_t n) const {
        const double r = M / static_cast<double>(n);
        return 2.0 * gamma * r + r * r * abs_derivative_integral + 0.25 * r * r * fisher;
    }
};

inline ShiftHellingerBound shift_hellinger_bound(const NuisanceDensity& eta) {
    if (eta.kind() != DensityKind::shift) {
        throw std::invalid_argument("shift_hellinger_bound: shift kind required");
    }
    std::vector<double> breaks;
    for (const double t : eta.nodes()) {
        if (std::isfinite(t)) breaks.push_back(t);
    }
    const auto opts = detail::metric_tolerance();
    ShiftHellingerBound b;
    b.gamma = eta.jump_at_zero();
    b.abs_derivative_integral = quad::integrate_piecewise(
        [&eta](double x) { return std::abs(eta.derivative(x)); }, 0.0, kInf, breaks, opts);
    b.fisher = quad::integrate_piecewise(
        [&eta](double x) {
            const double g = eta.log_derivative(x);
            return eta.density(x) * g * g;
        },
        0.0, kInf, breaks, opts);
    return b;
}

/// Which constant bounds |eta'| / eta on the grid: alpha - S or alpha + S.
struct LogDerivativeProbe {
    double sup_abs_log_derivative = 0.0;
    double alpha_minus_S = 0.0;
    double alpha_plus_S = 0.0;
    bool minus_bound_holds = false;
    bool plus_bound_holds = false;
};

inline LogDerivativeProbe log_derivative_probe(const NuisanceDensity& eta) {
    if (eta.kind() != DensityKind::shift) {
        throw std::invalid_argument("log_derivative_probe: shift kind required");
    }
    LogDerivativeProbe p;
    for (const double v : eta.score().values()) {
        p.sup_abs_log_derivative = std::max(p.sup_abs_log_derivative, std::abs(v - eta.alpha()));
    }
    p.alpha_minus_S = eta.alpha() - eta.S();
    p.alpha_plus_S = eta.alpha() + eta.S();
    const double tol = 1e-12 * p.alpha_plus_S;
    p.minus_bound_holds = p.sup_abs_log_derivative <= p.alpha_minus_S + tol;
    p.plus_bound_holds = p.sup_abs_log_derivative <= p.alpha_plus_S + tol;
    return p;
}

// ---------------------------------------------------------------------------
// Kullback-Leibler neighbourhoods.

struct KlDiagnostics {
    double rho = 0.0;
    double M = 0.0;
    std::size_t n = 0;
    std::size_t h_grid_size = 64;
    /// -P0 log(p_{theta0,eta} / p0) and P0 log^2(p_{theta0,eta} / p0).
    double k_m1 = 0.0;
    double k_m2 = 0.0;
    /// P0 sup_h (-1_A log(p_{theta_n(h),eta} / p0)) and P0 (sup_h ...)^2, sup over the h grid.
    double kn_m1 = 0.0;
    double kn_m2 = 0.0;
    /// Log-Lipschitz modulus m M / n bounding the off-grid error of the sup.
    double off_grid_modulus = 0.0;
    bool in_K = false;
    bool in_Kn = false;
    /// Membership after adding the off-grid modulus.
    bool in_Kn_conservative = false;
    /// Smallest L with eta in K(L rho), resp. K_n(L rho, M) (grid / conservative).
    double fitted_L1 = 0.0;
    double fitted_L2 = 0.0;
    double fitted_L2_conservative = 0.0;
};

/// Log-Lipschitz constant of theta -> log p_{theta,eta}(x) near theta0.
inline double model_log_lipschitz(const ModelSpec& spec, const NuisanceDensity* eta) {
    switch (spec.kind) {
        case ModelKind::parametric_shift_exp: return spec.lambda;
        case ModelKind::semiparam_shift: {
            const NuisanceDensity* e = spec.resolve(eta);
            return e->alpha() + e->S();
        }
        case ModelKind::semiparam_scale:
            return (2.0 + 8.0 * spec.resolve(eta)->S()) / spec.theta0;
    }
    return 0.0;
}

inline KlDiagnostics kl_neighborhood_diagnostics(const ModelSpec& spec, const NuisanceDensity& eta,
                                                 double rho, double M, std::size_t n,
                                                 std::size_t h_grid_size = 64) {
    if (!spec.is_semiparametric()) {
        throw std::invalid_argument("kl_neighborhood_diagnostics: semiparametric model required");
    }
    if (!(rho > 0.0) || !(M >= 0.0) || n == 0 || h_grid_size < 2) {
        throw std::invalid_argument("kl_neighborhood_diagnostics: need rho > 0, M >= 0, n >= 1");
    }
    KlDiagnostics r;
    r.rho = rho;
    r.M = M;
    r.n = n;
    r.h_grid_size = h_grid_size;

    const NuisanceDensity& eta0 = *spec.eta0;
    const bool scale = spec.kind == ModelKind::semiparam_scale;
    const double theta0 = spec.theta0;
    std::vector<double> thetas(h_grid_size);
    for (std::size_t j = 0; j < h_grid_size; ++j) {
        const double h = -M + 2.0 * M * static_cast<double>(j) / static_cast<double>(h_grid_size - 1);
        thetas[j] = spec.theta_at(h, n);
    }
    if (scale && thetas.front() <= 0.0) {
        throw std::invalid_argument("kl_neighborhood_diagnostics: M / n too large for theta0");
    }

    const double lo = scale ? 0.0 : theta0;
    const double hi = scale ? theta0 : kInf;
    std::vector<double> breaks;
    for (const double t : eta0.nodes()) {
        if (std::isfinite(t)) breaks.push_back(scale ? theta0 * t : theta0 + t);
    }
    for (const double t : eta.nodes()) {
        if (std::isfinite(t)) breaks.push_back(scale ? theta0 * t : theta0 + t);
    }
    for (const double th : thetas) {
        if (th > lo && th < hi) breaks.push_back(th);
    }

    auto log_p0 = [&](double x) { return model_log_density(spec, theta0, nullptr, x); };
    auto log_ratio0 = [&](double x) { return model_log_density(spec, theta0, &eta, x) - log_p0(x); };
    auto sup_term = [&](double x) {
        const double lp0 = log_p0(x);
        double best = kNegInf;
        for (const double th : thetas) {
            const double lp = model_log_density(spec, th, &eta, x);
            best = std::max(best, std::isfinite(lp) ? -(lp - lp0) : 0.0);
        }
        return best;
    };
    const quad::AdaptiveOptions opts{1e-13, 1e-9, 2000};
    auto moment = [&](auto&& g, int power) {
        return quad::integrate_piecewise(
            [&](double x) {
                const double lp0 = log_p0(x);
                if (!std::isfinite(lp0)) return 0.0;
                const double v = g(x);
                return std::exp(lp0) * (power == 1 ? v : v * v);
            },
            lo, hi, breaks, opts);
    };
    r.k_m1 = -moment(log_ratio0, 1);
    r.k_m2 = moment(log_ratio0, 2);
    r.kn_m1 = moment(sup_term, 1);
    r.kn_m2 = moment(sup_term, 2);
    r.off_grid_modulus = model_log_lipschitz(spec, &eta) * M / static_cast<double>(n);

    const double rho2 = rho * rho;
    r.in_K = r.k_m1 <= rho2 && r.k_m2 <= rho2;
    r.in_Kn = r.kn_m1 <= rho2 && r.kn_m2 <= rho2;
    const double c1 = r.kn_m1 + r.off_grid_modulus;
    const double c2 = std::pow(std::sqrt(std::max(r.kn_m2, 0.0)) + r.off_grid_modulus, 2);
    r.in_Kn_conservative = c1 <= rho2 && c2 <= rho2;
    r.fitted_L1 = std::sqrt(std::max({r.k_m1, r.k_m2, 0.0})) / rho;
    r.fitted_L2 = std::sqrt(std::max({r.kn_m1, r.kn_m2, 0.0})) / rho;
    r.fitted_L2_conservative = std::sqrt(std::max({c1, c2, 0.0})) / rho;
    return r;
}

// ---------------------------------------------------------------------------
// Sandwich bounds for int_0^eps eta.

struct IntBoundsReport {
    double eps = 0.0;
    double integral = 0.0;
    double abs_derivative_integral = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool passed = false;
};

inline IntBoundsReport int_bounds_report(const NuisanceDensity& eta, double eps) {
    if (!(eps > 0.0) || !(eps <= eta.upper()) || std::isinf(eps)) {
        throw std::invalid_argument("int_bounds_check: eps must lie in (0, upper]");
    }
    std::vector<double> breaks;
    for (const double t : eta.nodes()) {
        if (t > 0.0 && t < eps) breaks.push_back(t);
    }
    IntBoundsReport r;
    r.eps = eps;
    r.integral = eta.mass(0.0, eps);
    r.abs_derivative_integral = quad::integrate_piecewise(
        [&eta](double x) { return std::abs(eta.derivative(x)); }, 0.0, eps, breaks,
        detail::metric_tolerance());
    const double eta0 = eta.density(0.0);
    r.lower = eta0 * eps - eps * r.abs_derivative_integral;
    r.upper = eta0 * eps + eps * r.abs_derivative_integral;
    const double tol = 1e-12 * std::max(r.integral, 1e-300) + 1e-15;
    r.passed = r.lower <= r.integral + tol && r.integral <= r.upper + tol;
    return r;
}

inline bool int_bounds_check(const NuisanceDensity& eta, double eps) {
    return int_bounds_report(eta, eps).passed;
}

// ---------------------------------------------------------------------------
// Diagnostics without a threshold.

/// H(P_{theta_n(h),eta}, P_{theta0,eta}) / H(P_{theta0,eta}, P0) per n for draws
/// with d_H(eta, eta0) >= L rho. Rows hold the median ratio over qualifying draws.
struct ConeProbeRow {
    std::size_t n = 0;
    std::size_t qualifying = 0;
    double median_ratio = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<ConeProbeRow> cone_condition_probe(const ModelSpec& spec,
                                                      std::span<const NuisanceDensity> draws,
                                                      double h, double L, double rho,
                                                      const std::vector<std::size_t>& n_list) {
    std::vector<const NuisanceDensity*> far;
    std::vector<double> dist;
    for (const auto& eta : draws) {
        const double d = hellinger(model_pair(spec, spec.theta0, &eta, spec.theta0, nullptr));
        if (d >= L * rho) {
            far.push_back(&eta);
            dist.push_back(d);
        }
    }
    std::vector<ConeProbeRow> rows;
    for (const std::size_t n : n_list) {
        ConeProbeRow row;
        row.n = n;
        row.qualifying = far.size();
        std::vector<double> ratios;
        for (std::size_t i = 0; i < far.size(); ++i) {
            const double num =
                hellinger(model_pair(spec, spec.theta_at(h, n), far[i], spec.theta0, far[i]));
            ratios.push_back(num / dist[i]);
        }
        if (!ratios.empty()) {
            const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
            std::nth_element(ratios.begin(), mid, ratios.end());
            row.median_ratio = *mid;
        }
        rows.push_back(row);
    }
    return rows;
}

/// Empirical sup over the supplied draws and theta grid of
/// P_n log(p_{theta,eta} / p_{theta0,eta}) restricted to n |theta - theta0| > M_n.
/// A diagnostic, not a proof: the sup over the whole nuisance space is not computable.
struct MarginalLrProbe {
    double M_n = 0.0;
    double sup_value = kNegInf;
    double sup_theta = std::numeric_limits<double>::quiet_NaN();
    static constexpr const char* label = "diagnostic, not a proof";
};

inline MarginalLrProbe marginal_lr_condition_probe(const ModelSpec& spec, const Dataset& data,
                                                   std::span<const NuisanceDensity> draws,
                                                   double M_n, const std::vector<double>& thetas) {
    MarginalLrProbe probe;
    probe.M_n = M_n;
    const double n = static_cast<double>(data.n());
    auto consider = [&](const NuisanceDensity* eta) {
        for (const double th : thetas) {
            if (!(n * std::abs(th - spec.theta0) > M_n)) continue;
            double sum = 0.0;
            for (const double xi : data.x) {
                sum += model_log_density(spec, th, eta, xi) -
                       model_log_density(spec, spec.theta0, eta, xi);
            }
            const double v = sum / n;
            if (v > probe.sup_value) {
                probe.sup_value = v;
                probe.sup_theta = th;
            }
        }
    };
    if (!spec.is_semiparametric()) {
        consider(nullptr);
    } else {
        for (const auto& eta : draws) consider(&eta);
    }
    return probe;
}

}  // namespace laebvm
