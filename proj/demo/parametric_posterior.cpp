// Posterior for the boundary of a shifted exponential against its limit as n grows.

#include <cstdio>

#include "laebvm/posterior.hpp"

int main() {
    using namespace laebvm;
    const auto spec = ModelSpec::parametric(1.0, 0.0);
    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    std::printf("%8s %12s %12s %12s %12s\n", "n", "X_(1)", "post mean", "limit mean", "TV");
    for (const std::size_t n : {10u, 100u, 1000u, 10000u}) {
        const auto data = sample(spec, spec.theta0, nullptr, n, derive_seed(1, {n}));
        const auto post = marginal_posterior(spec, data, prior, {}, GridConfig{});
        const auto est = bayes_point_estimates(post);
        std::printf("%8zu %12.6f %12.6f %12.6f %12.3e\n", n, data.min, est.mean, est.limit_mean,
                    tv_to_limit(post, limit_of(post)));
    }
}
