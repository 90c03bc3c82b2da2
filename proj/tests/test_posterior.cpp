#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "laebvm/harness/stats.hpp"
#include "laebvm/posterior.hpp"
#include "laebvm/priors.hpp"

using namespace laebvm;

namespace {

NuisanceDensity exp1() {
    return esscher_shift(ScoreFunction::constant(DomainKind::half_line, 0.0, 0.5), 1.0);
}

std::vector<NuisanceDensity> shift_draws(std::size_t count, std::uint64_t seed, double alpha = 1.0) {
    const ScorePriorSampler s{0.5, ScorePriorVariant::compactified, 257, seed};
    std::vector<NuisanceDensity> out;
    for (std::size_t j = 0; j < count; ++j) out.push_back(esscher_shift(sample_score(s, j), alpha));
    return out;
}

std::vector<NuisanceDensity> scale_draws(std::size_t count, std::uint64_t seed) {
    const ScorePriorSampler s{1.0, ScorePriorVariant::unit_interval, 257, seed};
    std::vector<NuisanceDensity> out;
    for (std::size_t j = 0; j < count; ++j) out.push_back(esscher_scale(sample_score(s, j), 1.0));
    return out;
}

PosteriorGrid exp_grid(double delta, double rate, double grid_gamma, std::size_t nodes = 2049) {
    auto h = posterior_h_grid(delta, grid_gamma, Orientation::negative, {nodes, 40.0, 1});
    std::vector<double> lv(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) lv[i] = std::log(rate) - rate * (delta - h[i]);
    return PosteriorGrid::from_log_values(std::move(h), std::move(lv), delta, grid_gamma,
                                          Orientation::negative);
}

}  // namespace

TEST(LogSumExp, StableAndExact) {
    const std::vector<double> v = {1000.0, 1000.0};
    EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::numbers::ln2, 1e-12);
    const std::vector<double> w = {-1e308, std::log(2.0), kNegInf};
    EXPECT_NEAR(log_sum_exp(w), std::log(2.0), 1e-15);
    EXPECT_EQ(log_sum_exp(std::vector<double>{kNegInf, kNegInf}), kNegInf);
    EXPECT_EQ(log_sum_exp(std::vector<double>{}), kNegInf);
}

TEST(IntegratedLik, SingleTrueDrawIsLinearInH) {
    const auto eta = exp1();
    const auto spec = ModelSpec::shift(eta, 0.0);
    const auto d = sample(spec, 0.0, nullptr, 30, 1);
    const double delta = lae_quantities(spec, d).delta_n;
    const std::vector<NuisanceDensity> one = {eta};
    for (double h : {-3.0, -0.5, 0.0, delta}) EXPECT_NEAR(integrated_log_lik(spec, h, one, d), h, 1e-11);
    EXPECT_EQ(integrated_log_lik(spec, delta + 1e-6, one, d), kNegInf);
}

TEST(IntegratedLik, MatchesDirectAveraging) {
    const auto draws = shift_draws(500, 3);
    const auto spec = ModelSpec::shift(exp1(), 0.0);
    const auto d = sample(spec, 0.0, nullptr, 8, 2);
    const double delta = lae_quantities(spec, d).delta_n;
    for (double h : {-2.0, -0.3, 0.5 * delta}) {
        const double theta = spec.theta_at(h, d.n());
        long double acc = 0.0L;
        for (const auto& eta : draws) {
            long double prod = 1.0L;
            for (const double x : d.x) {
                prod *= static_cast<long double>(eta.density(x - theta)) /
                        static_cast<long double>(spec.eta0->density(x));
            }
            acc += prod;
        }
        const double want = static_cast<double>(std::log(acc / 500.0L));
        EXPECT_NEAR(integrated_log_lik(spec, h, draws, d), want, 1e-6 * std::max(1.0, std::abs(want)));
    }
    EXPECT_THROW(integrated_log_lik(spec, 0.0, std::vector<NuisanceDensity>{}, d), std::invalid_argument);
}

TEST(Grid, RejectsDegenerateConfigs) {
    const auto spec = ModelSpec::parametric(1.0);
    const auto d = sample(spec, 0.0, nullptr, 10, 1);
    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    EXPECT_THROW(marginal_posterior(spec, d, prior, {}, {15, 40.0, 1}), std::invalid_argument);
    EXPECT_NO_THROW(marginal_posterior(spec, d, prior, {}, {16, 40.0, 1}));
    EXPECT_EQ(marginal_posterior(spec, d, prior, {}, {16, 40.0, 1}).size(), 17u);
}

TEST(Grid, SpacingNearBoundaryIsFine) {
    for (double gamma : {0.5, 1.0, 3.0}) {
        const auto h = posterior_h_grid(0.7, gamma, Orientation::negative, {});
        EXPECT_EQ(h.back(), 0.7);
        EXPECT_LE(h.back() - h[h.size() - 2], 1.0 / (10.0 * gamma));
        const auto g = posterior_h_grid(-0.7, gamma, Orientation::positive, {});
        EXPECT_EQ(g.front(), -0.7);
        EXPECT_LE(g[1] - g.front(), 1.0 / (10.0 * gamma));
    }
}

TEST(Conjugate, FlatPriorGivesTruncatedExponential) {
    for (double lambda : {0.5, 1.0, 3.0}) {
        const auto spec = ModelSpec::parametric(lambda, 0.0);
        const auto d = sample(spec, 0.0, nullptr, 100, 17);
        const auto post = marginal_posterior(spec, d, ThetaPrior::uniform(-10.0, 10.0), {});
        EXPECT_LE(tv_to_limit(post, limit_of(post)), 1e-6);
        EXPECT_NEAR(post.integral(), 1.0, 1e-8);
        const auto e = bayes_point_estimates(post);
        const double n = 100.0;
        EXPECT_NEAR(e.mean, d.min - 1.0 / (n * lambda), 1e-8);
        EXPECT_NEAR(e.limit_mean, d.min - 1.0 / (n * lambda), 1e-12);
        EXPECT_NEAR(e.median, d.min - std::numbers::ln2 / (n * lambda), 1e-8);
        EXPECT_NEAR(e.limit_median, d.min - std::numbers::ln2 / (n * lambda), 1e-12);
    }
}

TEST(Conjugate, GaussianPriorAtLargeN) {
    const auto spec = ModelSpec::parametric(1.0, 0.0);
    std::vector<double> tv;
    for (std::size_t r = 0; r < 25; ++r) {
        const auto d = sample(spec, 0.0, nullptr, 400, derive_seed(5, "bvm", 400, r));
        const auto post = marginal_posterior(spec, d, ThetaPrior::gaussian(0.0, 1.0), {});
        tv.push_back(tv_to_limit(post, limit_of(post)));
    }
    EXPECT_LT(stats::median(tv), 0.05);
}

TEST(Tv, LimitAgainstItself) {
    const auto g = exp_grid(1.3, 2.0, 2.0);
    EXPECT_LE(tv_to_limit(g, {1.3, 2.0, Orientation::negative}), 1e-9);
    EXPECT_THROW(tv_to_limit(g, {1.4, 2.0, Orientation::negative}), std::invalid_argument);
    EXPECT_THROW(tv_to_limit(g, {1.3, 2.0, Orientation::positive}), std::invalid_argument);
}

TEST(Tv, ExponentialsWithCommonEndpoint) {
    // Rates gamma and 2 gamma cross at d = ln 2 / gamma: TV = 1/2 - 1/4.
    const double gamma = 1.7;
    const auto g = exp_grid(0.4, 2.0 * gamma, gamma);
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double oracle =
        0.5 * (GK::integrate([&](double s) {
                   return std::abs(2.0 * gamma * std::exp(-2.0 * gamma * s) - gamma * std::exp(-gamma * s));
               }, 0.0, std::numbers::ln2 / gamma) +
               GK::integrate([&](double s) {
                   return std::abs(2.0 * gamma * std::exp(-2.0 * gamma * s) - gamma * std::exp(-gamma * s));
               }, std::numbers::ln2 / gamma, 60.0 / gamma));
    EXPECT_NEAR(oracle, 0.25, 1e-12);
    // Interpolation error is O(spacing^4): about 1e-8 at 2049 nodes, 16x smaller at twice the density.
    const double coarse = std::abs(tv_to_limit(g, {0.4, gamma, Orientation::negative}) - 0.25);
    const double fine = std::abs(tv_to_limit(exp_grid(0.4, 2.0 * gamma, gamma, 4097), {0.4, gamma, Orientation::negative}) - 0.25);
    EXPECT_LT(coarse, 5e-8);
    EXPECT_LT(fine, coarse / 8.0);
}

TEST(Tv, ScaleInvarianceOfUnnormalizedValues) {
    const auto spec = ModelSpec::parametric(1.0);
    const auto d = sample(spec, 0.0, nullptr, 50, 4);
    const auto post = marginal_posterior(spec, d, ThetaPrior::gaussian(0.0, 1.0), {});
    auto lv = post.log_unnorm();
    for (auto& v : lv) v += 123.456;
    const auto shifted = PosteriorGrid::from_log_values(post.h_nodes(), lv, post.delta_n(), post.gamma_hat(),
                                                        post.orientation(), post.n(), post.theta0());
    for (std::size_t i = 0; i < post.size(); ++i) {
        EXPECT_NEAR(shifted.density(i), post.density(i), 1e-12 * std::max(1.0, post.density(i)));
    }
    EXPECT_NEAR(tv_to_limit(shifted, limit_of(shifted)), tv_to_limit(post, limit_of(post)), 1e-12);
    EXPECT_NEAR(total_variation(shifted, post), 0.0, 1e-12);
}

TEST(Tv, TriangleInequalityOnRandomTriples) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.3, 3.0);
    for (int i = 0; i < 200; ++i) {
        const auto a = exp_grid(0.0, U(rng), 1.0, 257);
        const auto b = exp_grid(0.0, U(rng), 1.0, 257);
        const auto c = exp_grid(0.0, U(rng), 1.0, 257);
        const double ab = total_variation(a, b);
        const double bc = total_variation(b, c);
        const double ac = total_variation(a, c);
        ASSERT_LE(ac, ab + bc + 1e-12);
        ASSERT_NEAR(ab, total_variation(b, a), 1e-15);
    }
}

TEST(Semiparametric, ShiftPosteriorSupportAndNormalization) {
    const auto spec = ModelSpec::shift(exp1(), 0.0);
    const auto d = sample(spec, 0.0, nullptr, 50, 9);
    const auto draws = shift_draws(100, 21);
    const auto post = marginal_posterior(spec, d, ThetaPrior::gaussian(0.0, 1.0), draws);
    EXPECT_EQ(post.h_nodes().back(), post.delta_n());
    EXPECT_NEAR(post.integral(), 1.0, 1e-8);
    for (std::size_t i = 0; i < post.size(); ++i) ASSERT_TRUE(std::isfinite(post.log_unnorm()[i]));
    EXPECT_EQ(integrated_log_lik(spec, post.delta_n() + 1e-9, draws, d), kNegInf);
    EXPECT_LE(post.quantile(0.999), post.delta_n());
    // The plug-in jump is a posterior average of the draws' jumps.
    double lo = kInf;
    double hi = 0.0;
    for (const auto& e : draws) {
        lo = std::min(lo, e.jump_at_zero());
        hi = std::max(hi, e.jump_at_zero());
    }
    EXPECT_GE(post.plugin_gamma(), lo);
    EXPECT_LE(post.plugin_gamma(), hi);
    EXPECT_LT(tv_to_limit(post, limit_of(post)), 1.0);
}

TEST(Semiparametric, ScalePosteriorIsMirrored) {
    const auto eta0 = esscher_scale(ScoreFunction::constant(DomainKind::unit_interval, 0.0, 1.0), 1.0);
    const auto spec = ModelSpec::scale(eta0, 2.0);
    const auto d = sample(spec, 2.0, nullptr, 50, 9);
    const auto post = marginal_posterior(spec, d, ThetaPrior::uniform(0.5, 4.0), scale_draws(100, 4));
    EXPECT_EQ(post.orientation(), Orientation::positive);
    EXPECT_EQ(post.h_nodes().front(), post.delta_n());
    EXPECT_LE(post.delta_n(), 0.0);
    EXPECT_NEAR(post.integral(), 1.0, 1e-8);
    EXPECT_GE(post.quantile(0.001), post.delta_n());
    const auto e = bayes_point_estimates(post);
    EXPECT_GT(e.mean, d.max);
    EXPECT_NEAR(e.limit_mean, d.max + 1.0 / (50.0 * post.gamma_hat()), 1e-12);
}

TEST(Semiparametric, MeanMatchesFinerGrid) {
    const auto spec = ModelSpec::shift(exp1(), 0.0);
    const auto d = sample(spec, 0.0, nullptr, 40, 12);
    const auto draws = shift_draws(60, 2);
    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    const auto coarse = bayes_point_estimates(marginal_posterior(spec, d, prior, draws));
    const auto fine = bayes_point_estimates(marginal_posterior(spec, d, prior, draws, {20481, 40.0, 1}));
    EXPECT_NEAR(coarse.mean, fine.mean, 1e-9);
    EXPECT_NEAR(coarse.median, fine.median, 1e-8);
}

TEST(Semiparametric, ThreadCountDoesNotChangeResult) {
    const auto spec = ModelSpec::shift(exp1(), 0.0);
    const auto d = sample(spec, 0.0, nullptr, 60, 13);
    const auto draws = shift_draws(50, 6);
    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    const auto a = marginal_posterior(spec, d, prior, draws, {2049, 40.0, 1});
    const auto b = marginal_posterior(spec, d, prior, draws, {2049, 40.0, 4});
    EXPECT_EQ(a.log_unnorm(), b.log_unnorm());
    EXPECT_EQ(a.plugin_gamma(), b.plugin_gamma());
}

TEST(Semiparametric, DrawsOnDifferentGridsAgreeWithSharedPath) {
    const auto spec = ModelSpec::shift(exp1(), 0.0);
    const auto d = sample(spec, 0.0, nullptr, 30, 14);
    auto draws = shift_draws(20, 7);
    const auto prior = ThetaPrior::gaussian(0.0, 1.0);
    // Same functions on a refined grid: linear interpolation is exact at the old nodes
    // and between them, so the posterior must not change beyond rounding.
    std::vector<NuisanceDensity> refined;
    for (const auto& e : draws) {
        const auto& g = e.score().grid();
        const auto& v = e.score().values();
        std::vector<double> g2;
        std::vector<double> v2;
        for (std::size_t k = 0; k + 1 < g.size(); ++k) {
            g2.push_back(g[k]);
            v2.push_back(v[k]);
            g2.push_back(0.5 * (g[k] + g[k + 1]));
            v2.push_back(0.5 * (v[k] + v[k + 1]));
        }
        g2.push_back(1.0);
        v2.push_back(v.back());
        refined.push_back(esscher_shift(ScoreFunction(DomainKind::half_line, g2, v2, 0.5), 1.0));
    }
    refined.push_back(esscher_shift(ScoreFunction::constant(DomainKind::half_line, 0.0, 0.5, 65), 1.0));
    draws.push_back(exp1());
    const auto mixed = marginal_posterior(spec, d, prior, refined);
    const auto base = marginal_posterior(spec, d, prior, draws);
    EXPECT_LT(total_variation(mixed, base), 1e-9);
}

TEST(Export, CsvHasHeaderAndAllNodes) {
    const auto g = exp_grid(0.0, 1.0, 1.0, 33);
    std::ostringstream os;
    g.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("h,density\n", 0), 0u);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 34);
}
