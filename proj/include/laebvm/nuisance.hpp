#pragma once

// Score functions and the nuisance densities obtained from them by
// exponential tilting.
//
//   shift:  eta(x) = exp(-alpha x + int_0^x l) / Z,  x in [0, inf), alpha > S
//   scale:  eta(x) = exp(    S x + int_0^x l) / Z,  x in [0, 1]
//
// A score is stored on a grid in the compactified coordinate u in [0, 1]
// (u = 2 atan(t) / pi on the half-line, u = x on the unit interval) and is
// linear in u between nodes. With that representation the cumulative
// integral int_0^x l has a closed form on every cell, so log eta is exact
// up to rounding and the normalizer is the only quadrature involved.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "laebvm/quadrature.hpp"

namespace laebvm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr std::size_t kDefaultScoreNodes = 257;

enum class DomainKind { half_line, unit_interval };
enum class DensityKind { shift, scale };

inline const char* to_string(DomainKind d) {
    return d == DomainKind::half_line ? "half_line" : "unit_interval";
}
inline const char* to_string(DensityKind k) { return k == DensityKind::shift ? "shift" : "scale"; }

/// Psi(x) = 2 atan(x) / pi, mapping [-inf, inf] onto [-1, 1].
inline double psi(double x) { return 2.0 * std::atan(x) / std::numbers::pi; }

/// Inverse of psi on [0, 1]; psi_inverse(1) = inf.
inline double psi_inverse(double u) {
    if (u >= 1.0) return kInf;
    return std::tan(0.5 * std::numbers::pi * u);
}

/// Inverse of psi on [-1, 1].
inline double psi_inverse_signed(double u) {
    if (u >= 1.0) return kInf;
    if (u <= -1.0) return kNegInf;
    return std::tan(0.5 * std::numbers::pi * u);
}

namespace detail {
// Antiderivative of psi on [0, inf).
inline double psi_antiderivative(double s) {
    return (2.0 / std::numbers::pi) * (s * std::atan(s) - 0.5 * std::log1p(s * s));
}
}  // namespace detail

/// A bounded continuous score on [0, inf] or [0, 1].
class ScoreFunction {
public:
    ScoreFunction(DomainKind domain, std::vector<double> grid, std::vector<double> values,
                  double bound)
        : domain_(domain),
          grid_(std::make_shared<const std::vector<double>>(std::move(grid))),
          values_(std::move(values)),
          bound_(bound) {
        const auto& g = *grid_;
        if (g.size() < 2 || g.size() != values_.size()) {
            throw std::invalid_argument("ScoreFunction: need >= 2 grid points matching values");
        }
        if (g.front() != 0.0 || g.back() != 1.0) {
            throw std::invalid_argument("ScoreFunction: grid must span [0, 1]");
        }
        for (std::size_t i = 1; i < g.size(); ++i) {
            if (!(g[i] > g[i - 1])) {
                throw std::invalid_argument("ScoreFunction: grid must be strictly increasing");
            }
        }
        if (!(bound_ > 0.0) || !std::isfinite(bound_)) {
            throw std::invalid_argument("ScoreFunction: bound must be positive and finite");
        }
        for (const double v : values_) {
            if (!std::isfinite(v)) throw std::invalid_argument("ScoreFunction: non-finite value");
            if (std::abs(v) > bound_) {
                throw std::invalid_argument("ScoreFunction: value outside the ball of radius " +
                                            std::to_string(bound_));
            }
        }
    }

    static std::vector<double> uniform_grid(std::size_t nodes) {
        if (nodes < 2) throw std::invalid_argument("uniform_grid: need >= 2 nodes");
        std::vector<double> g(nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            g[i] = static_cast<double>(i) / static_cast<double>(nodes - 1);
        }
        g.back() = 1.0;
        return g;
    }

    /// Samples f(u) at the nodes of a uniform compactified grid.
    static ScoreFunction from_compact(DomainKind domain, const std::function<double(double)>& f,
                                      double bound, std::size_t nodes = kDefaultScoreNodes) {
        auto g = uniform_grid(nodes);
        std::vector<double> v(g.size());
        std::transform(g.begin(), g.end(), v.begin(), f);
        return {domain, std::move(g), std::move(v), bound};
    }

    static ScoreFunction constant(DomainKind domain, double value, double bound,
                                  std::size_t nodes = kDefaultScoreNodes) {
        return from_compact(domain, [value](double) { return value; }, bound, nodes);
    }

    [[nodiscard]] DomainKind domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<double>& grid() const noexcept { return *grid_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] double bound() const noexcept { return bound_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] double sup_norm() const {
        double m = 0.0;
        for (const double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    [[nodiscard]] double to_compact(double x) const {
        if (domain_ == DomainKind::half_line) return x >= kInf ? 1.0 : psi(x);
        return x;
    }

    /// Value at compactified coordinate u (clamped to [0, 1]).
    [[nodiscard]] double at_compact(double u) const {
        const auto& g = *grid_;
        if (u <= 0.0) return values_.front();
        if (u >= 1.0) return values_.back();
        const auto it = std::upper_bound(g.begin(), g.end(), u);
        const std::size_t k = static_cast<std::size_t>(it - g.begin()) - 1;
        const double w = (u - g[k]) / (g[k + 1] - g[k]);
        return values_[k] + w * (values_[k + 1] - values_[k]);
    }

    /// Value at natural coordinate x (t on the half-line, x on [0, 1]).
    [[nodiscard]] double operator()(double x) const { return at_compact(to_compact(x)); }

    [[nodiscard]] bool same_grid(const ScoreFunction& other) const {
        return domain_ == other.domain_ && (grid_ == other.grid_ || *grid_ == *other.grid_);
    }

private:
    DomainKind domain_;
    std::shared_ptr<const std::vector<double>> grid_;
    std::vector<double> values_;
    double bound_;
};

/// Position of a point relative to a score grid. Depends only on the grid, so
/// one Location can be reused for every density sharing that grid.
struct Location {
    std::uint32_t cell = 0;
    double x = 0.0;   // natural coordinate
    double dt = 0.0;  // x - node[cell]
    double dg = 0.0;  // int_{node}^{x} (u(s) - u_cell) ds
};

class NuisanceDensity;
NuisanceDensity esscher_shift(const ScoreFunction& score, double alpha);
NuisanceDensity esscher_scale(const ScoreFunction& score, double S);

/// Immutable density produced by one of the two Esscher transforms.
class NuisanceDensity {
public:
    [[nodiscard]] DensityKind kind() const noexcept { return kind_; }
    [[nodiscard]] const ScoreFunction& score() const noexcept { return score_; }
    /// Tilt rate of the shift transform (0 for the scale kind).
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    /// Ball radius: score bound for shift, the transform's S for scale.
    [[nodiscard]] double S() const noexcept { return s_; }
    [[nodiscard]] double log_normalizer() const noexcept { return log_normalizer_; }
    [[nodiscard]] double jump_at_zero() const noexcept { return jump_at_zero_; }
    [[nodiscard]] double jump_at_one() const noexcept { return jump_at_one_; }
    [[nodiscard]] double upper() const noexcept {
        return kind_ == DensityKind::shift ? kInf : 1.0;
    }
    /// Linear coefficient of the exponent: -alpha (shift) or +S (scale).
    [[nodiscard]] double base_rate() const noexcept { return base_rate_; }
    /// Bound on |eta'/eta|: alpha + S (shift) or 2S (scale).
    [[nodiscard]] double log_lipschitz_constant() const noexcept {
        return kind_ == DensityKind::shift ? alpha_ + s_ : 2.0 * s_;
    }

    [[nodiscard]] bool in_domain(double x) const { return x >= 0.0 && x <= upper(); }

    /// Requires x in [0, upper()] and x finite.
    [[nodiscard]] Location locate(double x) const {
        const auto& nodes = nodes_;
        auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
        std::size_t k = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
        k = std::min(k, nodes.size() - 2);
        Location loc;
        loc.cell = static_cast<std::uint32_t>(k);
        loc.x = x;
        loc.dt = x - nodes[k];
        if (kind_ == DensityKind::shift) {
            const double uk = score_.grid()[k];
            loc.dg = detail::psi_antiderivative(x) - antiderivative_at_node_[k] - uk * loc.dt;
        } else {
            loc.dg = 0.5 * loc.dt * loc.dt;
        }
        return loc;
    }

    /// int_0^x l(s) ds for a located point.
    [[nodiscard]] double cumulative_score(const Location& loc) const {
        const auto& y = score_.values();
        return prefix_[loc.cell] + y[loc.cell] * loc.dt + slope_[loc.cell] * loc.dg;
    }

    [[nodiscard]] double cumulative_score(double x) const {
        if (x <= 0.0) return 0.0;
        return cumulative_score(locate(std::min(x, upper())));
    }

    [[nodiscard]] double log_density(const Location& loc) const {
        return base_rate_ * loc.x + cumulative_score(loc) - log_normalizer_;
    }

    /// log eta(x); -inf outside the domain.
    [[nodiscard]] double log_density(double x) const {
        if (!(x >= 0.0) || x > upper() || std::isinf(x)) return kNegInf;
        return log_density(locate(x));
    }

    [[nodiscard]] double density(double x) const { return std::exp(log_density(x)); }

    /// eta'(x) / eta(x) = base_rate + l(x).
    [[nodiscard]] double log_derivative(double x) const { return base_rate_ + score_(x); }

    [[nodiscard]] double derivative(double x) const {
        if (!in_domain(x) || std::isinf(x)) return 0.0;
        return density(x) * log_derivative(x);
    }

    /// int_a^b eta with [a, b] inside the domain, by Gauss-Legendre panels
    /// whose width keeps the exponent's variation below one per panel.
    [[nodiscard]] double mass(double a, double b) const {
        a = std::max(a, 0.0);
        b = std::min(b, upper());
        if (!(b > a)) return 0.0;
        if (std::isinf(b)) throw std::invalid_argument("mass: finite upper limit required");
        const double width = 1.0 / std::max(log_lipschitz_constant(), 1.0);
        auto f = [this](double x) { return std::exp(log_density(x)); };
        double sum = 0.0;
        // Panels never straddle a grid node, where l has a kink.
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), a);
        double lo = a;
        while (lo < b) {
            const double hi = (it == nodes_.end()) ? b : std::min(*it, b);
            if (hi > lo) {
                const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / width));
                sum += quad::gauss_legendre_composite(f, lo, hi, panels);
            }
            lo = hi;
            if (it != nodes_.end()) ++it;
        }
        return sum;
    }

    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }

    [[nodiscard]] bool same_grid(const NuisanceDensity& other) const {
        return kind_ == other.kind_ && score_.same_grid(other.score_);
    }

private:
    friend NuisanceDensity esscher_shift(const ScoreFunction&, double);
    friend NuisanceDensity esscher_scale(const ScoreFunction&, double);

    NuisanceDensity(ScoreFunction score, DensityKind kind, double alpha, double s)
        : score_(std::move(score)), kind_(kind), alpha_(alpha), s_(s) {
        base_rate_ = kind_ == DensityKind::shift ? -alpha_ : s_;
        build_cumulative();
        normalize();
    }

    void build_cumulative() {
        const auto& u = score_.grid();
        const auto& y = score_.values();
        const std::size_t K = u.size();
        nodes_.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            nodes_[k] = kind_ == DensityKind::shift ? psi_inverse(u[k]) : u[k];
        }
        nodes_[0] = 0.0;
        slope_.assign(K - 1, 0.0);
        prefix_.assign(K - 1, 0.0);
        antiderivative_at_node_.assign(K - 1, 0.0);
        for (std::size_t k = 0; k + 1 < K; ++k) {
            slope_[k] = (y[k + 1] - y[k]) / (u[k + 1] - u[k]);
            if (kind_ == DensityKind::shift) {
                antiderivative_at_node_[k] = detail::psi_antiderivative(nodes_[k]);
            }
        }
        for (std::size_t k = 0; k + 2 < K; ++k) {
            const double dt = nodes_[k + 1] - nodes_[k];
            double dg = 0.0;
            if (kind_ == DensityKind::shift) {
                dg = antiderivative_at_node_[k + 1] - antiderivative_at_node_[k] - u[k] * dt;
            } else {
                dg = 0.5 * dt * dt;
            }
            prefix_[k + 1] = prefix_[k] + y[k] * dt + slope_[k] * dg;
        }
    }

    void normalize() {
        log_normalizer_ = 0.0;
        auto f = [this](double x) { return std::exp(log_density(x)); };
        const double width = 1.0 / std::max(log_lipschitz_constant(), 1.0);
        double total = 0.0;
        if (kind_ == DensityKind::scale) {
            for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
                const double lo = nodes_[k];
                const double hi = nodes_[k + 1];
                const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / width));
                total += quad::gauss_legendre_composite(f, lo, hi, panels);
            }
        } else {
            // Half-line: stop once the remaining mass, bounded by
            // exp(-alpha T + L(T)) / (alpha - S), is negligible, and add that bound.
            const double decay = alpha_ - s_;
            bool done = false;
            for (std::size_t k = 0; k + 1 < nodes_.size() && !done; ++k) {
                double lo = nodes_[k];
                const double hi = nodes_[k + 1];
                while (lo < hi) {
                    const double tail = f(lo) / decay;
                    if (total > 0.0 && tail < 1e-13 * total) {
                        total += tail;
                        done = true;
                        break;
                    }
                    double panel_hi = lo + width;
                    if (panel_hi > hi) panel_hi = hi;
                    total += quad::gauss_legendre(f, lo, panel_hi);
                    lo = panel_hi;
                }
            }
        }
        log_normalizer_ = std::log(total);
        jump_at_zero_ = std::exp(-log_normalizer_);
        jump_at_one_ = density(1.0);
    }

    ScoreFunction score_;
    DensityKind kind_;
    double alpha_ = 0.0;
    double s_ = 0.0;
    double base_rate_ = 0.0;
    double log_normalizer_ = 0.0;
    double jump_at_zero_ = 0.0;
    double jump_at_one_ = 0.0;
    std::vector<double> nodes_;   // natural coordinates of the grid (last may be inf)
    std::vector<double> slope_;   // dl/du per cell
    std::vector<double> prefix_;  // int_0^{node_k} l
    std::vector<double> antiderivative_at_node_;
};

/// Shift-model transform on the half-line. Requires alpha > S, where S is the
/// score's ball radius.
inline NuisanceDensity esscher_shift(const ScoreFunction& score, double alpha) {
    if (score.domain() != DomainKind::half_line) {
        throw std::invalid_argument("esscher_shift: score must live on the half-line");
    }
    if (!std::isfinite(alpha) || !(alpha > score.bound())) {
        throw std::invalid_argument("esscher_shift: alpha must exceed the score bound S");
    }
    return {score, DensityKind::shift, alpha, score.bound()};
}

/// Scale-model transform on [0, 1]. Requires S > 0 and sup|l| <= S.
inline NuisanceDensity esscher_scale(const ScoreFunction& score, double S) {
    if (score.domain() != DomainKind::unit_interval) {
        throw std::invalid_argument("esscher_scale: score must live on the unit interval");
    }
    if (!std::isfinite(S) || !(S > 0.0)) {
        throw std::invalid_argument("esscher_scale: S must be positive");
    }
    if (score.sup_norm() > S) {
        throw std::invalid_argument("esscher_scale: score outside the ball of radius S");
    }
    return {score, DensityKind::scale, 0.0, S};
}

/// Checks p_{theta,eta}(x) / p_{theta0,eta}(x) <= exp(m |theta - theta0|) with
/// m = alpha + S (shift) or m = (2 + 8S) / theta0 (scale, |theta - theta0| < theta0 / 2).
inline bool log_lipschitz_check(const NuisanceDensity& eta, double theta0, double theta,
                                double x) {
    double log_ratio = 0.0;
    double m = 0.0;
    if (eta.kind() == DensityKind::shift) {
        if (x < std::max(theta0, theta)) {
            throw std::invalid_argument("log_lipschitz_check: x outside the common support");
        }
        log_ratio = eta.log_density(x - theta) - eta.log_density(x - theta0);
        m = eta.alpha() + eta.S();
    } else {
        if (!(theta0 > 0.0) || !(std::abs(theta - theta0) < 0.5 * theta0)) {
            throw std::invalid_argument("log_lipschitz_check: theta outside the theta0/2 ball");
        }
        if (x < 0.0 || x > std::min(theta0, theta)) {
            throw std::invalid_argument("log_lipschitz_check: x outside the common support");
        }
        log_ratio = eta.log_density(x / theta) - std::log(theta) - eta.log_density(x / theta0) +
                    std::log(theta0);
        m = (2.0 + 8.0 * eta.S()) / theta0;
    }
    const double allowed = m * std::abs(theta - theta0);
    return log_ratio <= allowed + 1e-12 * std::max(1.0, std::abs(allowed));
}

}  // namespace laebvm
