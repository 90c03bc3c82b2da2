#pragma once

// Independent reference implementations used by the tests. They share no
// numerical code with the library: cumulative integrals and normalizers come
// from Boost's Gauss-Kronrod rule applied cell by cell.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "laebvm/nuisance.hpp"

namespace oracle {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

inline double gk(auto&& f, double a, double b) { return GK::integrate(f, a, b, 3, 1e-12); }

/// Esscher density rebuilt from the raw grid samples.
class Density {
public:
    Density(const laebvm::ScoreFunction& s, bool shift, double rate)
        : u_(s.grid()), y_(s.values()), shift_(shift), rate_(rate) {
        const std::size_t K = u_.size();
        t_.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            t_[k] = shift_ ? (k + 1 == K ? std::numeric_limits<double>::infinity()
                                          : std::tan(0.5 * std::numbers::pi * u_[k]))
                           : u_[k];
        }
        t_[0] = 0.0;
        prefix_.assign(K, 0.0);
        for (std::size_t k = 0; k + 2 < K; ++k) {
            prefix_[k + 1] = prefix_[k] + gk([this](double v) { return score(v); }, t_[k], t_[k + 1]);
        }
        double z = 0.0;
        for (std::size_t k = 0; k + 1 < K; ++k) {
            double a = t_[k];
            double b = t_[k + 1];
            if (std::isinf(b)) {
                // Last cell: the score is essentially its end value; integrate far enough.
                b = a + 200.0;
            }
            const double piece = gk([this](double x) { return std::exp(unnormalized_log(x)); }, a, b);
            z += piece;
            if (shift_ && z > 0.0 && piece < 1e-18 * z && a > 1.0) break;
        }
        log_z_ = std::log(z);
    }

    double score(double x) const {
        const double u = shift_ ? 2.0 * std::atan(x) / std::numbers::pi : x;
        if (u <= 0.0) return y_.front();
        if (u >= 1.0) return y_.back();
        const std::size_t k = cell(u_, u);
        return y_[k] + (u - u_[k]) / (u_[k + 1] - u_[k]) * (y_[k + 1] - y_[k]);
    }

    double cumulative(double x) const {
        const std::size_t k = cell(t_, x);
        // The score is smooth inside a cell, so one 61-point panel suffices.
        return prefix_[k] + GK::integrate([this](double v) { return score(v); }, t_[k], x, 0, 0.0);
    }

    double unnormalized_log(double x) const {
        return (shift_ ? -rate_ : rate_) * x + cumulative(x);
    }

    double log_density(double x) const { return unnormalized_log(x) - log_z_; }
    double log_normalizer() const { return log_z_; }

    /// int_0^x eta, cell by cell.
    double cdf(double x) const {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < t_.size() && t_[k] < x; ++k) {
            const double b = std::min(x, t_[k + 1]);
            acc += gk([this](double v) { return std::exp(log_density(v)); }, t_[k], b);
        }
        return acc;
    }
    const std::vector<double>& nodes() const { return t_; }

private:
    static std::size_t cell(const std::vector<double>& nodes, double x) {
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
        const auto k = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
        return std::min(k, nodes.size() - 2);
    }

    std::vector<double> u_;
    std::vector<double> y_;
    std::vector<double> t_;
    std::vector<double> prefix_;
    bool shift_;
    double rate_;
    double log_z_ = 0.0;
};

/// Grid score with i.i.d. uniform values in [-bound, bound] on K nodes.
inline laebvm::ScoreFunction random_score(std::mt19937_64& rng, laebvm::DomainKind domain,
                                          double bound, std::size_t K = 257) {
    std::uniform_real_distribution<double> U(-bound, bound);
    auto grid = laebvm::ScoreFunction::uniform_grid(K);
    std::vector<double> v(K);
    for (auto& x : v) x = U(rng);
    return {domain, std::move(grid), std::move(v), bound};
}

}  // namespace oracle
