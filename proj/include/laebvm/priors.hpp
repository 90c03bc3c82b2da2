#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "laebvm/nuisance.hpp"
#include "laebvm/random.hpp"

namespace laebvm {

/// Prior on the parameter of interest. All kinds are thick on the interior
/// of their support.
class ThetaPrior {
public:
    enum class Kind { gaussian, uniform, grid };

    static ThetaPrior gaussian(double mean, double sd) {
        if (!(sd > 0.0) || !std::isfinite(mean)) {
            throw std::invalid_argument("ThetaPrior::gaussian: sd must be positive");
        }
        ThetaPrior p;
        p.kind_ = Kind::gaussian;
        p.a_ = mean;
        p.b_ = sd;
        return p;
    }

    static ThetaPrior uniform(double a, double b) {
        if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
            throw std::invalid_argument("ThetaPrior::uniform: need a < b");
        }
        ThetaPrior p;
        p.kind_ = Kind::uniform;
        p.a_ = a;
        p.b_ = b;
        return p;
    }

    /// Piecewise-linear density through (xs[i], values[i]), rescaled to unit mass.
    static ThetaPrior grid(std::vector<double> xs, std::vector<double> values) {
        if (xs.size() < 2 || xs.size() != values.size()) {
            throw std::invalid_argument("ThetaPrior::grid: need >= 2 matching nodes");
        }
        double mass = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
                throw std::invalid_argument("ThetaPrior::grid: values must be finite and >= 0");
            }
            if (i > 0) {
                if (!(xs[i] > xs[i - 1])) {
                    throw std::invalid_argument("ThetaPrior::grid: nodes must increase");
                }
                mass += 0.5 * (values[i] + values[i - 1]) * (xs[i] - xs[i - 1]);
            }
        }
        if (!(mass > 0.0)) throw std::invalid_argument("ThetaPrior::grid: zero mass");
        for (auto& v : values) v /= mass;
        ThetaPrior p;
        p.kind_ = Kind::grid;
        p.a_ = xs.front();
        p.b_ = xs.back();
        p.xs_ = std::move(xs);
        p.values_ = std::move(values);
        return p;
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double param_a() const noexcept { return a_; }
    [[nodiscard]] double param_b() const noexcept { return b_; }
    [[nodiscard]] const std::vector<double>& grid_nodes() const noexcept { return xs_; }
    [[nodiscard]] const std::vector<double>& grid_values() const noexcept { return values_; }

    [[nodiscard]] double log_density(double theta) const {
        switch (kind_) {
            case Kind::gaussian: {
                const double z = (theta - a_) / b_;
                return -0.5 * z * z - std::log(b_) - 0.5 * std::log(2.0 * std::numbers::pi);
            }
            case Kind::uniform:
                if (theta < a_ || theta > b_) return kNegInf;
                return -std::log(b_ - a_);
            case Kind::grid: {
                if (theta < a_ || theta > b_) return kNegInf;
                auto it = std::upper_bound(xs_.begin(), xs_.end(), theta);
                std::size_t k = static_cast<std::size_t>(it - xs_.begin());
                k = std::clamp<std::size_t>(k, 1, xs_.size() - 1) - 1;
                const double w = (theta - xs_[k]) / (xs_[k + 1] - xs_[k]);
                return std::log(values_[k] + w * (values_[k + 1] - values_[k]));
            }
        }
        return kNegInf;
    }

    /// Thickness at theta: continuous there with strictly positive density.
    [[nodiscard]] bool thick_at(double theta) const {
        if (kind_ == Kind::gaussian) return true;
        return theta > a_ && theta < b_ && std::isfinite(log_density(theta));
    }

private:
    ThetaPrior() = default;
    Kind kind_ = Kind::gaussian;
    double a_ = 0.0;
    double b_ = 1.0;
    std::vector<double> xs_;
    std::vector<double> values_;
};

inline double log_theta_prior(const ThetaPrior& prior, double theta) {
    return prior.log_density(theta);
}

enum class ScorePriorVariant { compactified, unit_interval };

/// Brownian-path prior on the score ball: l(t) = S Psi(Z + W_{u(t)}) with Z
/// standard normal, W a Brownian motion on [0, 1] and u(t) the compactified
/// coordinate of the score grid. Stateless given (master_seed, index).
struct ScorePriorSampler {
    double S = 1.0;
    ScorePriorVariant variant = ScorePriorVariant::compactified;
    std::size_t grid_size = kDefaultScoreNodes;
    std::uint64_t master_seed = 0;

    [[nodiscard]] DomainKind domain() const {
        return variant == ScorePriorVariant::compactified ? DomainKind::half_line
                                                          : DomainKind::unit_interval;
    }
};

inline ScoreFunction sample_score(const ScorePriorSampler& sampler, std::uint64_t index) {
    if (!(sampler.S > 0.0)) throw std::invalid_argument("sample_score: S must be positive");
    if (sampler.grid_size < 2) throw std::invalid_argument("sample_score: grid_size < 2");
    Engine rng(derive_seed(sampler.master_seed, {0x73636f7265ULL, index}));
    auto grid = ScoreFunction::uniform_grid(sampler.grid_size);
    std::vector<double> values(grid.size());
    const double z = standard_normal(rng);
    double w = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (k > 0) w += std::sqrt(grid[k] - grid[k - 1]) * standard_normal(rng);
        values[k] = sampler.S * psi(z + w);
    }
    return {sampler.domain(), std::move(grid), std::move(values), sampler.S};
}

}  // namespace laebvm
