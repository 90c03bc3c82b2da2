// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "laebvm/harness/runner.hpp"
#include "laebvm/metrics.hpp"

using namespace laebvm;
namespace fs = std::filesystem;
using harness::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "laebvm-acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

harness::ExperimentResult run_pinned(const char* text) {
    auto config = harness::parse_config(json::parse(text));
    harness::RunOverrides o;
    o.out = (scratch() / harness::to_string(config.experiment)).string();
    o.threads = 1;
    return harness::run(config, o);
}

std::vector<double> medians(const harness::ExperimentResult& r, const std::string& column) {
    std::vector<double> out;
    for (const std::size_t n : r.config.n_list) out.push_back(harness::find_summary(r.summary, n, column)->median);
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (const double x : v) s += (s.empty() ? "" : " -> ") + fmt("%.6g", x);
    return s;
}

// 1. Risk of the MLE and the debiased estimator.
Outcome risk() {
    constexpr double tol_mle = 0.05;
    constexpr double tol_debiased = 0.03;
    const auto r = run_pinned(R"({
        "experiment": "risk", "master_seed": 20240601,
        "model": {"kind": "parametric_shift_exp", "lambda": 1.0, "theta0": 0.0},
        "n_list": [50], "replicates": 100000})");
    const auto* a = harness::find_summary(r.summary, 50, "sq_mle");
    const auto* b = harness::find_summary(r.summary, 50, "sq_debiased");
    return {std::abs(a->mean - 2.0) <= tol_mle && std::abs(b->mean - 1.0) <= tol_debiased,
            fmt("E[n^2(mle-theta0)^2] = %.4f (2 +- %.2f), debiased %.4f (1 +- %.2f)", a->mean, tol_mle,
                b->mean, tol_debiased)};
}

// 2. n (X_(1) - theta0) ~ Exp(lambda) at every n.
Outcome pivotality() {
    const auto spec = ModelSpec::parametric(1.0, 0.0);
    constexpr std::size_t draws = 10000;
    const double crit = 1.63 / std::sqrt(static_cast<double>(draws));
    bool ok = true;
    std::string detail;
    for (const std::size_t n : {std::size_t{10}, std::size_t{10000}}) {
        std::vector<double> v(draws);
        for (std::size_t i = 0; i < draws; ++i) {
            v[i] = lae_quantities(spec, sample(spec, 0.0, nullptr, n, derive_seed(20240607, {n, i}))).delta_n;
        }
        const double d = stats::ks_exponential(v, 1.0);
        ok = ok && d < crit;
        detail += fmt("n=%zu KS=%.5f  ", n, d);
    }
    return {ok, detail + fmt("(critical %.4f)", crit)};
}

// 3. Parametric posterior against its exponential limit.
Outcome bvm_parametric() {
    constexpr double threshold = 0.05;
    const auto r = run_pinned(R"({
        "experiment": "bvm_parametric", "master_seed": 20240602,
        "model": {"kind": "parametric_shift_exp", "lambda": 1.0, "theta0": 0.0},
        "prior": {"theta": {"type": "gaussian", "mean": 0.0, "sd": 1.0}},
        "n_list": [25, 100, 400], "replicates": 200, "grid": {"nodes": 2049, "span": 40}})");
    const auto m = medians(r, "tv");
    return {stats::strictly_decreasing(m) && m.back() < threshold,
            "median TV over n " + join(m) + fmt(" (strictly decreasing, last < %.2f)", threshold)};
}

// 4. Flat prior: the posterior is the limit up to quadrature error.
Outcome conjugate() {
    constexpr double tol = 1e-6;
    const auto spec = ModelSpec::parametric(1.0, 0.0);
    const auto prior = ThetaPrior::uniform(-50.0, 50.0);
    double worst = 0.0;
    for (std::size_t rep = 0; rep < 50; ++rep) {
        const auto data = sample(spec, 0.0, nullptr, 100, derive_seed(20240608, {rep}));
        const auto post = marginal_posterior(spec, data, prior, {}, GridConfig{});
        worst = std::max(worst, tv_to_limit(post, limit_of(post)));
    }
    return {worst <= tol, fmt("max TV over 50 replicates = %.3g (<= %.0e)", worst, tol)};
}

// 5. Semiparametric shift model.
Outcome bvm_shift() {
    const auto r = run_pinned(R"({
        "experiment": "bvm_shift", "master_seed": 20240603,
        "model": {"kind": "semiparam_shift", "theta0": 0.0, "alpha": 1.0, "S": 0.5,
                  "score": {"type": "constant", "value": 0.0}},
        "prior": {"theta": {"type": "gaussian", "mean": 0.0, "sd": 1.0},
                  "score": {"S": 0.5, "variant": "compactified", "grid_size": 257}},
        "n_list": [50, 200], "replicates": 100, "nuisance_draws": 500})");
    const auto m = medians(r, "tv");
    return {m[1] < m[0], "median TV over n " + join(m) + " (strictly decreasing)"};
}

// 6. Semiparametric scale model.
Outcome bvm_scale() {
    const auto r = run_pinned(R"({
        "experiment": "bvm_scale", "master_seed": 20240604,
        "model": {"kind": "semiparam_scale", "theta0": 2.0, "S": 1.0,
                  "score": {"type": "constant", "value": 0.0}},
        "prior": {"theta": {"type": "uniform", "a": 0.5, "b": 4.0},
                  "score": {"S": 0.5, "variant": "unit_interval", "grid_size": 257}},
        "n_list": [50, 200], "replicates": 100, "nuisance_draws": 500})");
    const auto m = medians(r, "tv");
    return {m[1] < m[0], "median TV over n " + join(m) + " (strictly decreasing)"};
}

// 7. Remainder of the exponential expansion.
Outcome lae() {
    const auto r = run_pinned(R"({
        "experiment": "lae_check", "master_seed": 20240605,
        "model": {"kind": "semiparam_shift", "theta0": 0.0, "alpha": 1.0, "S": 0.5,
                  "score": {"type": "sine", "amplitude": 0.4, "frequency": 1.0}},
        "n_list": [100, 1000, 10000], "replicates": 200,
        "options": {"h_values": [-1.0, 1.0]}})");
    const auto a = medians(r, "abs_R(h=-1)");
    const auto b = medians(r, "abs_R(h=1)");
    return {stats::strictly_decreasing(a) && stats::strictly_decreasing(b),
            "median |R|: h=-1 " + join(a) + "; h=1^delta " + join(b)};
}

// 8. sqrt(n) H stays bounded; parametric closed form.
Outcome hellinger_rate() {
    constexpr double growth_limit = 0.10;
    constexpr double limit_tol = 1e-3;
    constexpr double closed_form_tol = 1e-8;
    const ScorePriorSampler sampler{0.5, ScorePriorVariant::compactified, 257, 20240606};
    std::vector<NuisanceDensity> draws;
    for (std::uint64_t j = 0; j < 100; ++j) draws.push_back(esscher_shift(sample_score(sampler, j), 1.0));
    const auto eta0 = esscher_shift(ScoreFunction::constant(DomainKind::half_line, 0.0, 0.5), 1.0);
    const std::vector<std::size_t> ns = {100, 1000, 10000};
    const auto semi = hellinger_rate_check(ModelSpec::shift(eta0, 0.0), draws, 1.0, ns, growth_limit);

    // The criterion's Hellinger has the 1/2 factor: H_half = H / sqrt(2).
    const double lambda = 1.0;
    const double h = 1.0;
    const auto par = hellinger_rate_check(ModelSpec::parametric(lambda, 0.0), {}, h, ns);
    const double n = 10000.0;
    const double computed = par.rows.back().max_scaled / std::numbers::sqrt2;
    const double closed = std::sqrt(n * -std::expm1(-lambda * h / (2.0 * n)));
    const double limit = std::sqrt(lambda * h / 2.0);
    const bool ok = semi.growth < growth_limit && std::abs(computed - closed) <= closed_form_tol &&
                    std::abs(computed - limit) <= limit_tol;
    return {ok, fmt("growth %.4f (< %.2f); parametric %.8f vs closed form %.8f, limit %.6f (+- %.0e)",
                    semi.growth, growth_limit, computed, closed, limit, limit_tol)};
}

// 9. Property suites.
ScoreFunction uniform_noise_score(Engine& rng, DomainKind domain, double bound) {
    std::vector<double> v(257);
    for (auto& x : v) x = bound * (2.0 * uniform_open(rng) - 1.0);
    return {domain, ScoreFunction::uniform_grid(257), std::move(v), bound};
}

NuisanceDensity random_density(Engine& rng, std::size_t i) {
    const bool shift = i % 2 == 0;
    const auto domain = shift ? DomainKind::half_line : DomainKind::unit_interval;
    const double S = shift ? 0.05 + 0.9 * uniform_open(rng) : 0.05 + 2.0 * uniform_open(rng);
    const ScoreFunction score =
        i % 4 < 2 ? uniform_noise_score(rng, domain, S)
                  : sample_score({S, shift ? ScorePriorVariant::compactified : ScorePriorVariant::unit_interval,
                                  257, 20240609},
                                 i);
    return shift ? esscher_shift(score, S + 0.1 + 2.0 * uniform_open(rng)) : esscher_scale(score, S);
}

std::vector<double> finite_nodes(const NuisanceDensity& eta) {
    std::vector<double> b;
    for (const double t : eta.nodes()) {
        if (std::isfinite(t) && t > 0.0) b.push_back(t);
    }
    return b;
}

Outcome properties() {
    constexpr double mass_tol = 1e-8;
    constexpr double metric_tol = 1e-8;
    Engine rng(derive_seed(20240609, {9}));
    std::size_t esscher_fail = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const auto eta = random_density(rng, i);
        const bool shift = eta.kind() == DensityKind::shift;
        const double mass = quad::integrate_piecewise([&](double x) { return eta.density(x); }, 0.0,
                                                      shift ? kInf : 1.0, finite_nodes(eta));
        bool ok = std::abs(mass - 1.0) <= mass_tol;
        double prev = eta.density(0.0);
        for (int k = 1; k <= 400 && ok; ++k) {
            const double x = shift ? 0.05 * k : k / 400.0;
            const double d = eta.density(x);
            ok = shift ? d <= prev : d >= prev;
            prev = d;
        }
        for (int k = 0; k < 20 && ok; ++k) {
            if (shift) {
                const double th0 = 4.0 * uniform_open(rng) - 2.0;
                const double th = th0 + uniform_open(rng) - 0.5;
                ok = log_lipschitz_check(eta, th0, th, std::max(th0, th) + 10.0 * uniform_open(rng));
            } else {
                const double th0 = 0.5 + 3.0 * uniform_open(rng);
                const double th = th0 * (1.0 + 0.98 * (uniform_open(rng) - 0.5));
                ok = log_lipschitz_check(eta, th0, th, std::min(th0, th) * uniform_open(rng));
            }
        }
        esscher_fail += ok ? 0 : 1;
    }

    std::size_t int_fail = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const auto eta = random_density(rng, 2 * i);
        const double eps = std::pow(10.0, -4.0 + 5.0 * uniform_open(rng));
        int_fail += int_bounds_check(eta, eps) ? 0 : 1;
    }

    std::size_t ball_fail = 0;
    const ScorePriorSampler ball{0.5, ScorePriorVariant::compactified, 257, 20240610};
    for (std::uint64_t i = 0; i < 100000; ++i) ball_fail += sample_score(ball, i).sup_norm() <= 0.5 ? 0 : 1;

    std::size_t metric_fail = 0;
    for (std::size_t i = 0; i < 500; ++i) {
        const std::size_t kind = i % 2 == 0 ? 0 : 1;
        const auto a = random_density(rng, kind);
        const auto b = random_density(rng, kind);
        const auto c = random_density(rng, kind);
        const auto dk = a.kind();
        const double th = dk == DensityKind::shift ? 0.0 : 1.0;
        const double ab = d_H_nuisance(a, b, th, dk);
        const double ba = d_H_nuisance(b, a, th, dk);
        const double bc = d_H_nuisance(b, c, th, dk);
        const double ac = d_H_nuisance(a, c, th, dk);
        const double aa = d_H_nuisance(a, a, th, dk);
        const bool ok = std::abs(ab - ba) <= 1e-12 && ac <= ab + bc + metric_tol && aa <= metric_tol &&
                        ab >= 0.0 && ab <= std::numbers::sqrt2 + metric_tol;
        metric_fail += ok ? 0 : 1;
    }
    return {esscher_fail + int_fail + ball_fail + metric_fail == 0,
            fmt("failures: esscher %zu/1000, int-bounds %zu/1000, ball %zu/100000, metric %zu/500",
                esscher_fail, int_fail, ball_fail, metric_fail)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "risk of MLE and debiased estimator", 10.0, risk},
        {2, "exact pivotality of n(X_(1) - theta0)", 5.0, pivotality},
        {3, "parametric posterior limit", 120.0, bvm_parametric},
        {4, "conjugate exactness", 10.0, conjugate},
        {5, "semiparametric shift posterior limit", 1200.0, bvm_shift},
        {6, "semiparametric scale posterior limit", 1200.0, bvm_scale},
        {7, "exponential expansion remainder", 120.0, lae},
        {8, "Hellinger rate", 300.0, hellinger_rate},
        {9, "property suites", 300.0, properties},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s  %d  %-40s %7.1fs (budget %.0fs%s)  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    c.budget_s, in_time ? "" : ", exceeded", o.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(scratch(), ec);
    return failed == 0 ? 0 : 1;
}
