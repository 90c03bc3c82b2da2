// Unknown boundary with an unknown density shape: draw nuisance densities from the
// score prior, integrate them out and compare the marginal posterior to its limit.

#include <cstdio>

#include "laebvm/posterior.hpp"
#include "laebvm/priors.hpp"

int main() {
    using namespace laebvm;
    const auto truth = esscher_shift(
        ScoreFunction::from_compact(DomainKind::half_line, [](double u) { return 0.3 * (1.0 - 2.0 * u); }, 0.5), 1.0);
    const auto spec = ModelSpec::shift(truth, 0.0);
    std::printf("true jump eta0(0) = %.4f\n", truth.jump_at_zero());

    const ScorePriorSampler sampler{0.5, ScorePriorVariant::compactified, 257, 7};
    std::vector<NuisanceDensity> draws;
    for (std::uint64_t j = 0; j < 200; ++j) draws.push_back(esscher_shift(sample_score(sampler, j), 1.0));

    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    for (const std::size_t n : {50u, 200u, 800u}) {
        const auto data = sample(spec, spec.theta0, nullptr, n, derive_seed(2, {n}));
        const auto post = marginal_posterior(spec, data, prior, draws, GridConfig{});
        std::printf("n=%4zu  delta_n=%7.4f  plug-in jump=%.4f  TV to limit=%.4f\n", n, post.delta_n(),
                    post.plugin_gamma(), tv_to_limit(post, limit_of(post)));
    }
}
