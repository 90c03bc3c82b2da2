#pragma once

// Marginal posterior for the local parameter h = n (theta - theta0) with the
// nuisance integrated out by equal-weight Monte Carlo over prior draws, and
// its total-variation distance to the limiting (negative) exponential.
//
// Grid quadrature is composite Simpson on pairs of cells; total variation and
// quantiles integrate the piecewise-quadratic interpolant exactly, so the kink
// of |p - q| at a crossing does not cost an order of accuracy.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "laebvm/models.hpp"
#include "laebvm/priors.hpp"

namespace laebvm {

/// log(sum exp(v)); -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (const double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (const double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

struct GridConfig {
    /// Node count; an even value is raised by one so Simpson pairs tile the grid.
    std::size_t nodes = 2049;
    /// Grid length in units of 1/gamma.
    double span = 40.0;
    std::size_t threads = 1;
};

struct ExpLimit {
    double location = 0.0;
    double rate = 1.0;
    Orientation orientation = Orientation::negative;

    [[nodiscard]] double density(double h) const {
        const double d = orientation == Orientation::negative ? location - h : h - location;
        if (d < 0.0) return 0.0;
        return rate * std::exp(-rate * d);
    }

    /// Probability of [a, b].
    [[nodiscard]] double mass(double a, double b) const {
        auto cdf_dist = [this](double d) { return d <= 0.0 ? 0.0 : -std::expm1(-rate * d); };
        if (orientation == Orientation::negative) {
            return cdf_dist(location - a) - cdf_dist(location - b);
        }
        return cdf_dist(b - location) - cdf_dist(a - location);
    }
};

namespace detail {

// Quadratic through (0, d0), (s1, d1), (s2, d2): q(s) = d0 + b s + c s^2.
struct LocalQuadratic {
    double d0, b, c;
    [[nodiscard]] double value(double s) const { return d0 + s * (b + c * s); }
    [[nodiscard]] double integral(double s) const {
        return s * (d0 + s * (0.5 * b + c * s / 3.0));
    }
};

inline LocalQuadratic fit_quadratic(double s1, double s2, double d0, double d1, double d2) {
    const double g1 = (d1 - d0) / s1;
    const double g2 = (d2 - d0) / s2;
    const double c = (g2 - g1) / (s2 - s1);
    return {d0, g1 - c * s1, c};
}

// int_0^L |q(s)| ds, split at the roots of q inside (0, L).
inline double integrate_abs(const LocalQuadratic& q, double L) {
    double roots[2];
    int count = 0;
    const double scale = std::abs(q.d0) + std::abs(q.b) * L + std::abs(q.c) * L * L;
    if (std::abs(q.c) * L * L <= 1e-14 * scale) {
        if (q.b != 0.0) roots[count++] = -q.d0 / q.b;
    } else {
        const double disc = q.b * q.b - 4.0 * q.c * q.d0;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double t = -0.5 * (q.b + std::copysign(sq, q.b));
            if (t != 0.0) {
                roots[count++] = t / q.c;
                roots[count++] = q.d0 / t;
            } else {
                roots[count++] = 0.0;
            }
        }
    }
    double cuts[4] = {0.0, 0.0, 0.0, L};
    int m = 1;
    for (int i = 0; i < count; ++i) {
        if (roots[i] > 0.0 && roots[i] < L) cuts[m++] = roots[i];
    }
    if (m == 3 && cuts[1] > cuts[2]) std::swap(cuts[1], cuts[2]);
    cuts[m] = L;
    double sum = 0.0;
    for (int i = 0; i < m; ++i) sum += std::abs(q.integral(cuts[i + 1]) - q.integral(cuts[i]));
    return sum;
}

}  // namespace detail

/// Discretized marginal posterior over h.
class PosteriorGrid {
public:
    /// Builds a normalized grid from unnormalized log values. Nodes must be
    /// strictly increasing and odd in number (>= 17).
    static PosteriorGrid from_log_values(std::vector<double> h, std::vector<double> log_unnorm,
                                         double delta_n, double gamma_hat,
                                         Orientation orientation, std::size_t n = 1,
                                         double theta0 = 0.0) {
        if (h.size() < 17 || h.size() % 2 == 0 || h.size() != log_unnorm.size()) {
            throw std::invalid_argument("PosteriorGrid: need an odd node count >= 17");
        }
        for (std::size_t i = 1; i < h.size(); ++i) {
            if (!(h[i] > h[i - 1])) throw std::invalid_argument("PosteriorGrid: nodes must increase");
        }
        PosteriorGrid g;
        g.h_ = std::move(h);
        g.log_unnorm_ = std::move(log_unnorm);
        g.delta_n_ = delta_n;
        g.gamma_hat_ = gamma_hat;
        g.orientation_ = orientation;
        g.n_ = n;
        g.theta0_ = theta0;
        g.weights_ = simpson_weights(g.h_);
        double m = kNegInf;
        for (const double v : g.log_unnorm_) m = std::max(m, v);
        if (!std::isfinite(m)) throw std::invalid_argument("PosteriorGrid: no finite mass");
        double s = 0.0;
        for (std::size_t i = 0; i < g.h_.size(); ++i) {
            s += g.weights_[i] * std::exp(g.log_unnorm_[i] - m);
        }
        g.log_norm_const_ = m + std::log(s);
        return g;
    }

    static std::vector<double> simpson_weights(const std::vector<double>& x) {
        std::vector<double> w(x.size(), 0.0);
        for (std::size_t i = 0; i + 2 < x.size(); i += 2) {
            const double a = x[i + 1] - x[i];
            const double b = x[i + 2] - x[i + 1];
            const double f = (a + b) / 6.0;
            w[i] += f * (2.0 - b / a);
            w[i + 1] += f * (a + b) * (a + b) / (a * b);
            w[i + 2] += f * (2.0 - a / b);
        }
        return w;
    }

    [[nodiscard]] const std::vector<double>& h_nodes() const noexcept { return h_; }
    [[nodiscard]] const std::vector<double>& log_unnorm() const noexcept { return log_unnorm_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] double log_norm_const() const noexcept { return log_norm_const_; }
    [[nodiscard]] double delta_n() const noexcept { return delta_n_; }
    [[nodiscard]] double gamma_hat() const noexcept { return gamma_hat_; }
    [[nodiscard]] Orientation orientation() const noexcept { return orientation_; }
    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] double theta0() const noexcept { return theta0_; }
    /// Posterior-weighted average jump of the nuisance draws (NaN if unused).
    [[nodiscard]] double plugin_gamma() const noexcept { return plugin_gamma_; }
    void set_plugin_gamma(double g) { plugin_gamma_ = g; }

    [[nodiscard]] std::size_t size() const noexcept { return h_.size(); }

    [[nodiscard]] double density(std::size_t i) const {
        return std::exp(log_unnorm_[i] - log_norm_const_);
    }

    [[nodiscard]] std::vector<double> densities() const {
        std::vector<double> d(h_.size());
        for (std::size_t i = 0; i < h_.size(); ++i) d[i] = density(i);
        return d;
    }

    [[nodiscard]] double integral() const {
        double s = 0.0;
        for (std::size_t i = 0; i < h_.size(); ++i) s += weights_[i] * density(i);
        return s;
    }

    /// Smallest h with posterior mass below it equal to p.
    [[nodiscard]] double quantile(double p) const {
        const auto d = densities();
        double acc = 0.0;
        for (std::size_t i = 0; i + 2 < h_.size(); i += 2) {
            const double s1 = h_[i + 1] - h_[i];
            const double s2 = h_[i + 2] - h_[i];
            const auto q = detail::fit_quadratic(s1, s2, d[i], d[i + 1], d[i + 2]);
            const double piece = q.integral(s2);
            if (acc + piece >= p || i + 3 >= h_.size()) {
                double lo = 0.0;
                double hi = s2;
                for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(h_[i])); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (acc + q.integral(mid) < p) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return h_[i] + 0.5 * (lo + hi);
            }
            acc += piece;
        }
        return h_.back();
    }

    void write_csv(std::ostream& os) const {
        os << "h,density\n";
        os.precision(17);
        for (std::size_t i = 0; i < h_.size(); ++i) os << h_[i] << ',' << density(i) << '\n';
    }

private:
    PosteriorGrid() = default;
    std::vector<double> h_;
    std::vector<double> log_unnorm_;
    std::vector<double> weights_;
    double log_norm_const_ = 0.0;
    double delta_n_ = 0.0;
    double gamma_hat_ = 1.0;
    Orientation orientation_ = Orientation::negative;
    std::size_t n_ = 1;
    double theta0_ = 0.0;
    double plugin_gamma_ = std::numeric_limits<double>::quiet_NaN();
};

/// log of (1/J) sum_j exp(log_lik_ratio(theta_n(h), eta_j)). For the
/// parametric model there is no nuisance and the draws are ignored.
inline double integrated_log_lik(const ModelSpec& spec, double h,
                                 std::span<const NuisanceDensity> draws, const Dataset& data) {
    const double theta = spec.theta_at(h, data.n());
    if (!spec.is_semiparametric()) return log_lik_ratio(spec, theta, nullptr, data);
    if (draws.empty()) throw std::invalid_argument("integrated_log_lik: no nuisance draws");
    std::vector<double> terms(draws.size());
    for (std::size_t j = 0; j < draws.size(); ++j) {
        terms[j] = log_lik_ratio(spec, theta, &draws[j], data);
    }
    return log_sum_exp(terms) - std::log(static_cast<double>(draws.size()));
}

/// Locally uniform h grid ending (negative) or starting (positive) exactly at Delta_n.
inline std::vector<double> posterior_h_grid(double delta_n, double gamma, Orientation o,
                                            const GridConfig& cfg) {
    if (cfg.nodes < 16) throw std::invalid_argument("marginal_posterior: fewer than 16 nodes");
    if (!(gamma > 0.0) || !(cfg.span > 0.0)) {
        throw std::invalid_argument("marginal_posterior: gamma and span must be positive");
    }
    const std::size_t N = cfg.nodes % 2 == 0 ? cfg.nodes + 1 : cfg.nodes;
    const double length = cfg.span / gamma;
    std::vector<double> h(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double frac = static_cast<double>(j) / static_cast<double>(N - 1);
        h[j] = o == Orientation::negative ? delta_n - length * (1.0 - frac)
                                          : delta_n + length * frac;
    }
    if (o == Orientation::negative) {
        h.back() = delta_n;
    } else {
        h.front() = delta_n;
    }
    return h;
}

namespace detail {

template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Normalized grid posterior for h under theta_prior x (empirical nuisance
/// prior given by the draws). The limit rate gamma_hat comes from the true eta0.
inline PosteriorGrid marginal_posterior(const ModelSpec& spec, const Dataset& data,
                                        const ThetaPrior& theta_prior,
                                        std::span<const NuisanceDensity> draws,
                                        const GridConfig& cfg = {}) {
    const auto lae = lae_quantities(spec, data);
    const Orientation orient = spec.orientation();
    auto h = posterior_h_grid(lae.delta_n, lae.gamma, orient, cfg);
    const std::size_t N = h.size();
    const std::size_t n = data.n();
    const double boundary = orient == Orientation::negative ? data.min : data.max;
    const std::size_t boundary_index = orient == Orientation::negative ? N - 1 : 0;
    auto theta_of = [&](std::size_t j) {
        return j == boundary_index ? boundary : spec.theta_at(h[j], n);
    };

    std::vector<double> log_unnorm(N, kNegInf);
    double plugin = std::numeric_limits<double>::quiet_NaN();

    if (!spec.is_semiparametric()) {
        for (std::size_t j = 0; j < N; ++j) {
            const double theta = theta_of(j);
            log_unnorm[j] = theta_prior.log_density(theta) + log_lik_ratio(spec, theta, nullptr, data);
        }
    } else {
        if (draws.empty()) throw std::invalid_argument("marginal_posterior: no nuisance draws");
        const std::size_t D = draws.size();
        bool shared_grid = true;
        for (std::size_t d = 1; d < D && shared_grid; ++d) {
            shared_grid = draws[d].same_grid(draws[0]);
        }
        const bool scale = spec.kind == ModelKind::semiparam_scale;
        double baseline = 0.0;
        for (const double xi : data.x) {
            baseline += model_log_density(spec, spec.theta0, nullptr, xi);
        }
        // llr[j * D + d] for the plug-in rate afterwards.
        std::vector<double> llr(N * D, kNegInf);
        detail::parallel_for(N, cfg.threads, [&](std::size_t j) {
            const double theta = theta_of(j);
            const double log_prior = theta_prior.log_density(theta);
            if (!std::isfinite(log_prior)) return;
            std::vector<Location> locs(n);
            for (std::size_t i = 0; i < n; ++i) {
                double z = scale ? data.x[i] / theta : data.x[i] - theta;
                z = std::clamp(z, 0.0, draws[0].upper());
                locs[i] = draws[0].locate(z);
            }
            const double jacobian = scale ? -static_cast<double>(n) * std::log(theta) : 0.0;
            double* row = &llr[j * D];
            for (std::size_t d = 0; d < D; ++d) {
                double sum = 0.0;
                if (shared_grid) {
                    for (const auto& loc : locs) sum += draws[d].log_density(loc);
                } else {
                    for (const auto& loc : locs) sum += draws[d].log_density(loc.x);
                }
                row[d] = sum + jacobian - baseline;
            }
            log_unnorm[j] = log_prior +
                            log_sum_exp(std::span<const double>(row, D)) -
                            std::log(static_cast<double>(D));
        });

        // Posterior weight of each draw, for the plug-in jump estimate.
        const auto w = PosteriorGrid::simpson_weights(h);
        double m = kNegInf;
        for (std::size_t j = 0; j < N; ++j) {
            const double lp = theta_prior.log_density(theta_of(j));
            for (std::size_t d = 0; d < D; ++d) m = std::max(m, lp + llr[j * D + d]);
        }
        if (std::isfinite(m)) {
            double num = 0.0;
            double den = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                const double lp = theta_prior.log_density(theta_of(j));
                for (std::size_t d = 0; d < D; ++d) {
                    const double wt = w[j] * std::exp(lp + llr[j * D + d] - m);
                    num += wt * jump_rate(spec, &draws[d]);
                    den += wt;
                }
            }
            if (den > 0.0) plugin = num / den;
        }
    }

    auto grid = PosteriorGrid::from_log_values(std::move(h), std::move(log_unnorm), lae.delta_n,
                                               lae.gamma, orient, n, spec.theta0);
    grid.set_plugin_gamma(plugin);
    return grid;
}

/// Limit law centred at the grid's Delta_n with the grid's gamma_hat.
inline ExpLimit limit_of(const PosteriorGrid& post) {
    return {post.delta_n(), post.gamma_hat(), post.orientation()};
}

/// 1/2 int |post - limit| over the grid plus half the limit mass off the grid.
inline double tv_to_limit(const PosteriorGrid& post, const ExpLimit& limit) {
    const double tol = 1e-9 * std::max(1.0, std::abs(limit.location));
    if (std::abs(post.delta_n() - limit.location) > tol || post.orientation() != limit.orientation) {
        throw std::invalid_argument("tv_to_limit: posterior and limit disagree on Delta_n");
    }
    const auto& h = post.h_nodes();
    const auto p = post.densities();
    std::vector<double> diff(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) diff[i] = p[i] - limit.density(h[i]);
    double l1 = 0.0;
    for (std::size_t i = 0; i + 2 < h.size(); i += 2) {
        const auto q = detail::fit_quadratic(h[i + 1] - h[i], h[i + 2] - h[i], diff[i], diff[i + 1],
                                             diff[i + 2]);
        l1 += detail::integrate_abs(q, h[i + 2] - h[i]);
    }
    const double outside = 1.0 - limit.mass(h.front(), h.back());
    return std::clamp(0.5 * (l1 + outside), 0.0, 1.0);
}

/// 1/2 int |a - b| for two grids on the same nodes.
inline double total_variation(const PosteriorGrid& a, const PosteriorGrid& b) {
    if (a.h_nodes() != b.h_nodes()) throw std::invalid_argument("total_variation: node mismatch");
    const auto& h = a.h_nodes();
    const auto pa = a.densities();
    const auto pb = b.densities();
    double l1 = 0.0;
    for (std::size_t i = 0; i + 2 < h.size(); i += 2) {
        const auto q = detail::fit_quadratic(h[i + 1] - h[i], h[i + 2] - h[i], pa[i] - pb[i],
                                             pa[i + 1] - pb[i + 1], pa[i + 2] - pb[i + 2]);
        l1 += detail::integrate_abs(q, h[i + 2] - h[i]);
    }
    return std::clamp(0.5 * l1, 0.0, 1.0);
}

struct BayesPointEstimates {
    double mean = 0.0;          // theta scale
    double median = 0.0;        // theta scale
    double limit_mean = 0.0;    // theta scale
    double limit_median = 0.0;  // theta scale
};

inline BayesPointEstimates bayes_point_estimates(const PosteriorGrid& post) {
    const auto& h = post.h_nodes();
    const auto& w = post.weights();
    double mean_h = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) mean_h += w[i] * h[i] * post.density(i);
    const double n = static_cast<double>(post.n());
    const double sign = post.orientation() == Orientation::negative ? -1.0 : 1.0;
    BayesPointEstimates e;
    e.mean = post.theta0() + mean_h / n;
    e.median = post.theta0() + post.quantile(0.5) / n;
    e.limit_mean = post.theta0() + (post.delta_n() + sign / post.gamma_hat()) / n;
    e.limit_median = post.theta0() + (post.delta_n() + sign * std::numbers::ln2 / post.gamma_hat()) / n;
    return e;
}

}  // namespace laebvm
