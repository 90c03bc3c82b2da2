#pragma once

// Experiment execution and persistence.
//
// Every (n, replicate) pair is an independent task with its own RNG stream,
//   seed = derive_seed(master_seed, {fnv1a(experiment), n, replicate})
// (see random.hpp for the fold), so outputs do not depend on the number of
// worker threads. Completed tasks are appended to journal.tsv, which doubles
// as the set of done-markers for --resume.
//
// Output directory:
//   rows.csv     replicate,n,seed,<experiment columns>; sorted by n, then replicate
//   summary.csv  n,column,count,mean,se,median,min,max; finite values only
//   report.json  normalized config, hash, versions, tolerances, verdicts, timestamps
//   plot.py      matplotlib script over summary.csv

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "laebvm/harness/config.hpp"
#include "laebvm/harness/stats.hpp"
#include "laebvm/io.hpp"
#include "laebvm/metrics.hpp"
#include "laebvm/models.hpp"
#include "laebvm/posterior.hpp"
#include "laebvm/priors.hpp"
#include "laebvm/random.hpp"

#ifndef LAEBVM_VERSION
#define LAEBVM_VERSION "0.1.0"
#endif

namespace laebvm::harness {

namespace fs = std::filesystem;

struct Row {
    std::size_t replicate = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;
};

struct SummaryRow {
    std::size_t n = 0;
    std::string column;
    stats::Summary summary;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<std::string> columns;  // experiment columns, after replicate,n,seed
    std::vector<Row> rows;
    std::vector<SummaryRow> summary;
    json verdicts;
    std::size_t resumed_tasks = 0;
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    bool resume = false;
};

inline std::uint64_t task_seed(const ExperimentConfig& c, std::size_t n, std::size_t replicate) {
    return derive_seed(c.master_seed, to_string(c.experiment), n, replicate);
}

// ---------------------------------------------------------------------------
// Number formatting shared by the writer and the parser.

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kInf;
    if (s == "-inf") return kNegInf;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("bad number '" + s + "'");
    return v;
}

inline std::string format_h(double h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", h);
    return buf;
}

// ---------------------------------------------------------------------------
// Experiments.

inline std::vector<std::string> experiment_columns(const ExperimentConfig& c) {
    switch (c.experiment) {
        case Experiment::risk:
            return {"delta_n", "gamma", "theta_hat", "theta_tilde", "sq_mle", "sq_debiased"};
        case Experiment::bvm_parametric:
        case Experiment::bvm_shift:
        case Experiment::bvm_scale:
            return {"delta_n",        "gamma",           "tv",         "theta_hat",
                    "theta_tilde",    "posterior_mean",  "posterior_median",
                    "limit_mean",     "limit_median",    "plugin_gamma"};
        case Experiment::lae_check: {
            std::vector<std::string> cols = {"delta_n", "gamma"};
            for (const double h : c.options.h_values) {
                cols.push_back("h_eff(h=" + format_h(h) + ")");
                cols.push_back("R(h=" + format_h(h) + ")");
                cols.push_back("abs_R(h=" + format_h(h) + ")");
                if (c.options.integrated_lae) {
                    cols.push_back("IR(h=" + format_h(h) + ")");
                    cols.push_back("abs_IR(h=" + format_h(h) + ")");
                }
            }
            return cols;
        }
        case Experiment::hellinger_rate:
            return {"scaled_hellinger", "closed_form", "bound_scaled"};
        case Experiment::kl_diag:
            return {"score_distance", "k_m1",     "k_m2",           "kn_m1",
                    "kn_m2",          "off_grid_modulus", "in_K",   "in_Kn",
                    "in_Kn_conservative", "fitted_L1", "fitted_L2", "fitted_L2_conservative"};
        case Experiment::prior_check:
            return {"sup_norm", "in_ball", "start_latent", "quadratic_variation", "log_normalizer",
                    "jump"};
    }
    return {};
}

/// Immutable objects shared by all tasks.
struct Context {
    ExperimentConfig config;
    ModelSpec model;
    std::optional<ThetaPrior> theta_prior;
};

inline Context make_context(const ExperimentConfig& c) {
    Context ctx{c, build_model(c.model), std::nullopt};
    if (c.experiment == Experiment::bvm_parametric || c.experiment == Experiment::bvm_shift ||
        c.experiment == Experiment::bvm_scale) {
        ctx.theta_prior = build_theta_prior(c.theta_prior);
    }
    return ctx;
}

inline std::vector<NuisanceDensity> prior_draws(const ExperimentConfig& c, std::uint64_t seed,
                                                std::size_t count) {
    const ScorePriorSampler sampler{c.score_prior.S, c.score_prior.variant,
                                    c.score_prior.grid_size, derive_seed(seed, {0x6472617773ULL})};
    std::vector<NuisanceDensity> draws;
    draws.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        draws.push_back(nuisance_from_score(c.model, sample_score(sampler, j)));
    }
    return draws;
}

/// Seed of the nuisance draw used by replicate r of the per-draw experiments;
/// it does not depend on n so the same draws are compared across n.
inline std::uint64_t draw_seed(const ExperimentConfig& c, std::size_t replicate) {
    return derive_seed(c.master_seed, std::string(to_string(c.experiment)) + "/draw", 0, replicate);
}

inline std::vector<double> run_task(const Context& ctx, std::size_t n, std::size_t replicate,
                                    std::uint64_t seed) {
    const auto& c = ctx.config;
    const auto& spec = ctx.model;
    const double nd = static_cast<double>(n);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    switch (c.experiment) {
        case Experiment::risk: {
            const auto data = sample(spec, spec.theta0, nullptr, n, seed);
            const auto lae = lae_quantities(spec, data);
            const auto est = mle_and_debiased(spec, data);
            const double a = nd * (est.theta_hat - spec.theta0);
            const double b = nd * (est.theta_tilde - spec.theta0);
            return {lae.delta_n, lae.gamma, est.theta_hat, est.theta_tilde, a * a, b * b};
        }
        case Experiment::bvm_parametric:
        case Experiment::bvm_shift:
        case Experiment::bvm_scale: {
            const auto data = sample(spec, spec.theta0, nullptr, n, seed);
            std::vector<NuisanceDensity> draws;
            if (spec.is_semiparametric()) draws = prior_draws(c, seed, c.nuisance_draws);
            GridConfig grid = c.grid;
            grid.threads = 1;
            const auto post = marginal_posterior(spec, data, *ctx.theta_prior, draws, grid);
            const double tv = tv_to_limit(post, limit_of(post));
            const auto est = mle_and_debiased(spec, data);
            const auto bpe = bayes_point_estimates(post);
            return {post.delta_n(), post.gamma_hat(), tv,       est.theta_hat,
                    est.theta_tilde, bpe.mean,        bpe.median, bpe.limit_mean,
                    bpe.limit_median, post.plugin_gamma()};
        }
        case Experiment::lae_check: {
            const auto data = sample(spec, spec.theta0, nullptr, n, seed);
            const auto lae = lae_quantities(spec, data);
            std::vector<double> out = {lae.delta_n, lae.gamma};
            std::vector<NuisanceDensity> draws;
            double log_s0 = nan;
            if (c.options.integrated_lae) {
                draws = prior_draws(c, seed, c.nuisance_draws);
                log_s0 = integrated_log_lik(spec, 0.0, draws, data);
            }
            const bool negative = spec.orientation() == Orientation::negative;
            const double sign = negative ? 1.0 : -1.0;
            for (const double h : c.options.h_values) {
                const double h_eff = negative ? std::min(h, lae.delta_n) : std::max(h, lae.delta_n);
                const auto r = lae_remainder(spec, h_eff, nullptr, data);
                const double rv = r ? *r : nan;
                out.insert(out.end(), {h_eff, rv, std::abs(rv)});
                if (c.options.integrated_lae) {
                    const double ir =
                        integrated_log_lik(spec, h_eff, draws, data) - log_s0 - sign * h_eff * lae.gamma;
                    out.insert(out.end(), {ir, std::abs(ir)});
                }
            }
            return out;
        }
        case Experiment::hellinger_rate: {
            const double h = c.options.h_values.front();
            const double theta = spec.theta_at(h, n);
            const double root_n = std::sqrt(nd);
            if (!spec.is_semiparametric()) {
                const double v = root_n * hellinger(model_pair(spec, theta, nullptr, spec.theta0, nullptr));
                return {v, parametric_scaled_hellinger(spec.lambda, h, n), nan};
            }
            const auto draws = prior_draws(c, draw_seed(c, replicate), 1);
            const auto& eta = draws.front();
            const double v = root_n * hellinger(model_pair(spec, theta, &eta, spec.theta0, &eta));
            double bound = nan;
            if (spec.kind == ModelKind::semiparam_shift) {
                bound = root_n * std::sqrt(shift_hellinger_bound(eta).squared(std::abs(h), n));
            }
            return {v, nan, bound};
        }
        case Experiment::kl_diag: {
            // Draws in the sup-norm ball of radius rho^2 around the true score.
            const auto& l0 = spec.eta0->score();
            const double r2 = c.options.rho * c.options.rho;
            const ScorePriorSampler unit{1.0, c.score_prior.variant, l0.size(),
                                         derive_seed(draw_seed(c, replicate), {0x6b6cULL})};
            const auto w = sample_score(unit, 0);
            std::vector<double> values(l0.size());
            double dist = 0.0;
            for (std::size_t k = 0; k < values.size(); ++k) {
                values[k] = l0.values()[k] + r2 * w.values()[k];
                dist = std::max(dist, std::abs(values[k] - l0.values()[k]));
            }
            const double bound = spec.kind == ModelKind::semiparam_shift ? l0.bound() + r2 : c.model.S;
            const ScoreFunction score(l0.domain(), l0.grid(), std::move(values), bound);
            const auto eta = nuisance_from_score(c.model, score);
            const auto d = kl_neighborhood_diagnostics(spec, eta, c.options.rho, c.options.M, n);
            return {dist,
                    d.k_m1,
                    d.k_m2,
                    d.kn_m1,
                    d.kn_m2,
                    d.off_grid_modulus,
                    d.in_K ? 1.0 : 0.0,
                    d.in_Kn ? 1.0 : 0.0,
                    d.in_Kn_conservative ? 1.0 : 0.0,
                    d.fitted_L1,
                    d.fitted_L2,
                    d.fitted_L2_conservative};
        }
        case Experiment::prior_check: {
            const ScorePriorSampler sampler{c.score_prior.S, c.score_prior.variant, n, seed};
            const auto score = sample_score(sampler, 0);
            const auto& v = score.values();
            const double S = c.score_prior.S;
            double qv = 0.0;
            double prev = psi_inverse_signed(v.front() / S);
            const double start = prev;
            for (std::size_t k = 1; k < v.size(); ++k) {
                const double cur = psi_inverse_signed(v[k] / S);
                qv += (cur - prev) * (cur - prev);
                prev = cur;
            }
            double log_z = nan;
            double jump = nan;
            if (spec.is_semiparametric()) {
                const auto eta = nuisance_from_score(c.model, score);
                log_z = eta.log_normalizer();
                jump = jump_rate(spec, &eta);
            }
            return {score.sup_norm(), score.sup_norm() <= S ? 1.0 : 0.0, start, qv, log_z, jump};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Summaries and verdicts.

inline std::vector<SummaryRow> summarize_rows(const ExperimentConfig& c,
                                              const std::vector<std::string>& columns,
                                              const std::vector<Row>& rows) {
    std::vector<SummaryRow> out;
    for (const std::size_t n : c.n_list) {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            std::vector<double> v;
            for (const auto& r : rows) {
                if (r.n == n) v.push_back(r.values[k]);
            }
            out.push_back({n, columns[k], stats::summarize(v)});
        }
    }
    return out;
}

inline const stats::Summary* find_summary(const std::vector<SummaryRow>& s, std::size_t n,
                                          const std::string& column) {
    for (const auto& r : s) {
        if (r.n == n && r.column == column) return &r.summary;
    }
    return nullptr;
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json compute_verdicts(const ExperimentConfig& c, const ModelSpec& spec,
                             const std::vector<SummaryRow>& s) {
    json v = json::object();
    auto series = [&](const std::string& column, auto field) {
        std::vector<double> out;
        for (const std::size_t n : c.n_list) {
            const auto* p = find_summary(s, n, column);
            out.push_back(p ? field(*p) : std::numeric_limits<double>::quiet_NaN());
        }
        return out;
    };
    auto medians = [&](const std::string& column) {
        return series(column, [](const stats::Summary& x) { return x.median; });
    };
    auto to_json_vec = [](const std::vector<double>& x) {
        json a = json::array();
        for (const double d : x) a.push_back(num(d));
        return a;
    };
    switch (c.experiment) {
        case Experiment::risk: {
            const double g = jump_rate(spec, nullptr);
            json per = json::array();
            for (const std::size_t n : c.n_list) {
                const auto* a = find_summary(s, n, "sq_mle");
                const auto* b = find_summary(s, n, "sq_debiased");
                per.push_back({{"n", n},
                               {"mean_sq_mle", num(a->mean)},
                               {"se_sq_mle", num(a->se)},
                               {"target_sq_mle", 2.0 / (g * g)},
                               {"mean_sq_debiased", num(b->mean)},
                               {"se_sq_debiased", num(b->se)},
                               {"target_sq_debiased", 1.0 / (g * g)}});
            }
            v["risk"] = per;
            break;
        }
        case Experiment::bvm_parametric:
        case Experiment::bvm_shift:
        case Experiment::bvm_scale: {
            const auto m = medians("tv");
            v["median_tv"] = to_json_vec(m);
            v["median_tv_strictly_decreasing"] = stats::strictly_decreasing(m);
            break;
        }
        case Experiment::lae_check: {
            json per = json::object();
            for (const double h : c.options.h_values) {
                const std::string col = "abs_R(h=" + format_h(h) + ")";
                const auto m = medians(col);
                per[col] = {{"median", to_json_vec(m)},
                            {"strictly_decreasing", stats::strictly_decreasing(m)}};
                if (c.options.integrated_lae) {
                    const std::string icol = "abs_IR(h=" + format_h(h) + ")";
                    const auto mi = medians(icol);
                    per[icol] = {{"median", to_json_vec(mi)},
                                 {"strictly_decreasing", stats::strictly_decreasing(mi)}};
                }
            }
            v["median_abs_remainder"] = per;
            break;
        }
        case Experiment::hellinger_rate: {
            const auto mx = series("scaled_hellinger", [](const stats::Summary& x) { return x.max; });
            const double growth = mx.front() > 0.0 ? mx.back() / mx.front() - 1.0 : 0.0;
            v["max_scaled_hellinger"] = to_json_vec(mx);
            v["growth"] = num(growth);
            v["threshold"] = c.options.threshold;
            v["bounded"] = growth < c.options.threshold;
            v["convention"] = "H^2 = int (sqrt p - sqrt q)^2, range [0, 2]";
            break;
        }
        case Experiment::kl_diag: {
            v["max_fitted_L1"] = to_json_vec(series("fitted_L1", [](const stats::Summary& x) { return x.max; }));
            v["max_fitted_L2"] = to_json_vec(series("fitted_L2", [](const stats::Summary& x) { return x.max; }));
            v["max_fitted_L2_conservative"] = to_json_vec(
                series("fitted_L2_conservative", [](const stats::Summary& x) { return x.max; }));
            v["fraction_in_Kn_conservative"] =
                to_json_vec(series("in_Kn_conservative", [](const stats::Summary& x) { return x.mean; }));
            v["note"] = "constants are fitted from the draws, not taken from theory";
            break;
        }
        case Experiment::prior_check: {
            v["fraction_in_ball"] = to_json_vec(series("in_ball", [](const stats::Summary& x) { return x.mean; }));
            v["mean_quadratic_variation"] =
                to_json_vec(series("quadratic_variation", [](const stats::Summary& x) { return x.mean; }));
            break;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Files.

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_file(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot rename to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string row_line(const Row& r) {
    std::string line = std::to_string(r.replicate) + "," + std::to_string(r.n) + "," +
                       std::to_string(r.seed);
    for (const double v : r.values) line += "," + format_double(v);
    return line;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline Row parse_row(const std::string& line, std::size_t columns) {
    const auto f = split(line, ',');
    if (f.size() != columns + 3) throw std::runtime_error("malformed row: " + line);
    Row r;
    r.replicate = std::stoull(f[0]);
    r.n = std::stoull(f[1]);
    r.seed = std::stoull(f[2]);
    for (std::size_t k = 3; k < f.size(); ++k) r.values.push_back(parse_double(f[k]));
    return r;
}

inline std::string rows_csv(const std::vector<std::string>& columns, const std::vector<Row>& rows) {
    std::string out = "replicate,n,seed";
    for (const auto& col : columns) out += "," + col;
    out += "\n";
    for (const auto& r : rows) out += row_line(r) + "\n";
    return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& s) {
    std::string out = "n,column,count,mean,se,median,min,max\n";
    for (const auto& r : s) {
        out += std::to_string(r.n) + "," + r.column + "," + std::to_string(r.summary.count) + "," +
               format_double(r.summary.mean) + "," + format_double(r.summary.se) + "," +
               format_double(r.summary.median) + "," + format_double(r.summary.min) + "," +
               format_double(r.summary.max) + "\n";
    }
    return out;
}

inline std::string primary_column(Experiment e) {
    switch (e) {
        case Experiment::risk: return "sq_mle";
        case Experiment::bvm_parametric:
        case Experiment::bvm_shift:
        case Experiment::bvm_scale: return "tv";
        case Experiment::lae_check: return "abs_R";
        case Experiment::hellinger_rate: return "scaled_hellinger";
        case Experiment::kl_diag: return "fitted_L1";
        case Experiment::prior_check: return "sup_norm";
    }
    return "";
}

inline std::string plot_script(const ExperimentConfig& c) {
    std::string s = R"(#!/usr/bin/env python3
# Plots per-n summaries from summary.csv next to this script.
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
PREFIX = "@PREFIX@"
STAT = "@STAT@"

series = {}
with open(os.path.join(here, "summary.csv"), newline="") as f:
    for row in csv.DictReader(f):
        if not row["column"].startswith(PREFIX):
            continue
        value = float(row[STAT])
        series.setdefault(row["column"], []).append((int(row["n"]), value))

if not series:
    sys.exit("no matching columns in summary.csv")

fig, ax = plt.subplots(figsize=(6, 4))
for name, points in sorted(series.items()):
    points.sort()
    ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=name)
ax.set_xscale("log")
ax.set_xlabel("n")
ax.set_ylabel(STAT)
ax.set_title("@TITLE@")
ax.legend()
fig.tight_layout()
out = os.path.join(here, "@TITLE@.png")
fig.savefig(out, dpi=150)
print(out)
)";
    auto replace = [&s](const std::string& key, const std::string& value) {
        for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
            s.replace(pos, key.size(), value);
        }
    };
    const std::string stat = c.experiment == Experiment::hellinger_rate ? "max"
                             : c.experiment == Experiment::risk          ? "mean"
                                                                          : "median";
    replace("@PREFIX@", primary_column(c.experiment));
    replace("@STAT@", stat);
    replace("@TITLE@", to_string(c.experiment));
    return s;
}

inline json tolerances_json(const ExperimentConfig& c) {
    return {{"posterior_grid_nodes", c.grid.nodes},
            {"posterior_grid_span_over_gamma", c.grid.span},
            {"posterior_quadrature", "composite Simpson; TV integrates |quadratic interpolant| exactly"},
            {"esscher_tail_truncation_relative", 1e-13},
            {"quantile_table_nodes", QuantileTable::kNodes},
            {"metric_quadrature_rel_tol", 1e-11},
            {"metric_quadrature_abs_tol", 1e-15},
            {"kl_quadrature_rel_tol", 1e-9},
            {"kl_h_grid_size", 64},
            {"hellinger_growth_threshold", c.options.threshold}};
}

inline json versions_json() {
    return {{"laebvm", LAEBVM_VERSION},
            {"compiler", __VERSION__},
            {"cplusplus", static_cast<long>(__cplusplus)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline ExperimentConfig apply_overrides(ExperimentConfig c, const RunOverrides& o) {
    if (o.seed) c.master_seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.out) c.output_dir = *o.out;
    return c;
}

// ---------------------------------------------------------------------------
// run / report.

inline ExperimentResult run(ExperimentConfig config, const RunOverrides& overrides = {}) {
    config = apply_overrides(std::move(config), overrides);
    validate(config);
    const std::string started = utc_timestamp();
    ExperimentResult result;
    result.config = config;
    result.config_hash = config_hash(config);
    result.columns = experiment_columns(config);

    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

    const std::size_t R = config.replicates;
    const std::size_t total = config.n_list.size() * R;
    std::vector<std::optional<Row>> rows(total);

    const fs::path journal_path = dir / "journal.tsv";
    const std::string journal_header = "# config_hash=" + result.config_hash;
    if (overrides.resume && fs::exists(journal_path)) {
        std::istringstream in(read_file(journal_path));
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                if (line != journal_header) {
                    throw std::runtime_error("cannot resume '" + dir.string() +
                                             "': journal belongs to a different config");
                }
                first = false;
                continue;
            }
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;  // torn final line
            const std::size_t index = std::stoull(line.substr(0, tab));
            try {
                Row r = parse_row(line.substr(tab + 1), result.columns.size());
                if (index < total && !rows[index]) {
                    rows[index] = std::move(r);
                    ++result.resumed_tasks;
                }
            } catch (const std::exception&) {
                continue;  // torn final line
            }
        }
    }
    {
        // Rewrite the journal from the rows kept, dropping any torn tail.
        std::string content = journal_header + "\n";
        for (std::size_t i = 0; i < total; ++i) {
            if (rows[i]) content += std::to_string(i) + "\t" + row_line(*rows[i]) + "\n";
        }
        write_file(journal_path, content);
    }

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < total; ++i) {
        if (!rows[i]) pending.push_back(i);
    }
    const Context ctx = make_context(config);
    std::ofstream journal(journal_path, std::ios::app);
    if (!journal) throw std::runtime_error("cannot append to '" + journal_path.string() + "'");
    std::mutex journal_mutex;
    laebvm::detail::parallel_for(pending.size(), config.threads, [&](std::size_t k) {
        const std::size_t index = pending[k];
        const std::size_t n = config.n_list[index / R];
        const std::size_t replicate = index % R;
        const bool per_draw = config.experiment == Experiment::hellinger_rate ||
                              config.experiment == Experiment::kl_diag;
        Row row;
        row.replicate = replicate;
        row.n = n;
        row.seed = per_draw ? draw_seed(config, replicate) : task_seed(config, n, replicate);
        row.values = run_task(ctx, n, replicate, row.seed);
        const std::string line = std::to_string(index) + "\t" + row_line(row) + "\n";
        const std::lock_guard<std::mutex> lock(journal_mutex);
        journal << line << std::flush;
        rows[index] = std::move(row);
    });
    journal.close();

    for (auto& r : rows) result.rows.push_back(std::move(*r));
    write_file(dir / "rows.csv", rows_csv(result.columns, result.rows));
    // Re-read the rows as written so the summary is exactly recomputable from the file.
    {
        std::vector<Row> parsed;
        std::istringstream in(read_file(dir / "rows.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (!line.empty()) parsed.push_back(parse_row(line, result.columns.size()));
        }
        result.rows = std::move(parsed);
    }
    result.summary = summarize_rows(config, result.columns, result.rows);
    write_file(dir / "summary.csv", summary_csv(result.summary));
    result.verdicts = compute_verdicts(config, ctx.model, result.summary);

    json report = {
        {"config", to_json(config)},
        {"config_hash", result.config_hash},
        {"spec_hash", io::spec_hash(ctx.model)},
        {"versions", versions_json()},
        {"tolerances", tolerances_json(config)},
        {"rows_columns", [&] {
             json cols = {"replicate", "n", "seed"};
             for (const auto& col : result.columns) cols.push_back(col);
             return cols;
         }()},
        {"row_count", result.rows.size()},
        {"seed_derivation",
         "seed = derive_seed(master_seed, {fnv1a(experiment), n, replicate}); per-draw "
         "experiments use derive_seed(master_seed, {fnv1a(experiment + \"/draw\"), 0, replicate})"},
        {"verdicts", result.verdicts},
        {"notes", json::array()},
        {"metadata",
         {{"started_at", started},
          {"finished_at", utc_timestamp()},
          {"resumed_tasks", result.resumed_tasks}}}};
    if (config.experiment == Experiment::bvm_scale || config.experiment == Experiment::risk) {
        if (config.model.kind == ModelKind::semiparam_scale) {
            report["notes"].push_back(
                "theta_tilde for the scale model is X_(n) + 1/(n gamma_hat) with gamma_hat = "
                "eta0(1)/X_(n): an experimental convention");
        }
    }
    if (config.experiment == Experiment::kl_diag) {
        report["notes"].push_back(
            "draws are l0 + rho^2 * Psi(Z + W); sup over |h| <= M evaluated on a 64-point grid");
    }
    write_file(dir / "report.json", report.dump(2) + "\n");
    write_file(dir / "plot.py", plot_script(config));
    return result;
}

/// Re-derives summary.csv and the verdicts in report.json from rows.csv.
inline ExperimentResult report(const std::string& out_dir) {
    const fs::path dir(out_dir);
    json rep = json::parse(read_file(dir / "report.json"));
    ExperimentResult result;
    result.config = parse_config(rep.at("config"));
    validate(result.config);
    result.config_hash = config_hash(result.config);
    if (rep.contains("config_hash") && rep.at("config_hash") != result.config_hash) {
        throw std::runtime_error("report: config hash mismatch in '" + dir.string() + "'");
    }
    std::istringstream in(read_file(dir / "rows.csv"));
    std::string line;
    std::getline(in, line);
    const auto header = split(line, ',');
    if (header.size() < 3) throw std::runtime_error("report: malformed rows.csv header");
    result.columns.assign(header.begin() + 3, header.end());
    while (std::getline(in, line)) {
        if (!line.empty()) result.rows.push_back(parse_row(line, result.columns.size()));
    }
    const std::size_t expected = result.config.n_list.size() * result.config.replicates;
    if (result.rows.size() != expected) {
        throw std::runtime_error("report: rows.csv has " + std::to_string(result.rows.size()) +
                                 " rows, expected " + std::to_string(expected));
    }
    result.summary = summarize_rows(result.config, result.columns, result.rows);
    write_file(dir / "summary.csv", summary_csv(result.summary));
    result.verdicts = compute_verdicts(result.config, build_model(result.config.model), result.summary);
    rep["verdicts"] = result.verdicts;
    rep["metadata"]["report_regenerated_at"] = utc_timestamp();
    write_file(dir / "report.json", rep.dump(2) + "\n");
    return result;
}

}  // namespace laebvm::harness
