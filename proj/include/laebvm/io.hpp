#pragma once

// Serialization: nuisance densities and diagnostics as JSON, datasets as CSV.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "laebvm/metrics.hpp"
#include "laebvm/models.hpp"
#include "laebvm/nuisance.hpp"
#include "laebvm/random.hpp"

namespace laebvm::io {

using json = nlohmann::json;

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

inline json score_to_json(const ScoreFunction& score) {
    return {{"domain", to_string(score.domain())},
            {"grid", score.grid()},
            {"values", score.values()},
            {"bound", score.bound()}};
}

inline ScoreFunction score_from_json(const json& j) {
    const auto domain = j.at("domain").get<std::string>();
    DomainKind d;
    if (domain == "half_line") {
        d = DomainKind::half_line;
    } else if (domain == "unit_interval") {
        d = DomainKind::unit_interval;
    } else {
        throw std::invalid_argument("score_from_json: unknown domain '" + domain + "'");
    }
    return {d, j.at("grid").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
            j.at("bound").get<double>()};
}

inline json density_to_json(const NuisanceDensity& eta) {
    json j = {{"kind", to_string(eta.kind())},
              {"score", score_to_json(eta.score())},
              {"log_normalizer", eta.log_normalizer()}};
    if (eta.kind() == DensityKind::shift) {
        j["alpha"] = eta.alpha();
    } else {
        j["S"] = eta.S();
    }
    return j;
}

/// Rebuilds the density and checks the stored normalizer.
inline NuisanceDensity density_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    auto score = score_from_json(j.at("score"));
    NuisanceDensity eta = kind == "shift"   ? esscher_shift(score, j.at("alpha").get<double>())
                          : kind == "scale" ? esscher_scale(score, j.at("S").get<double>())
                                            : throw std::invalid_argument(
                                                  "density_from_json: unknown kind '" + kind + "'");
    if (j.contains("log_normalizer")) {
        const double stored = j.at("log_normalizer").get<double>();
        if (std::abs(stored - eta.log_normalizer()) > 1e-10) {
            throw std::runtime_error("density_from_json: stored log_normalizer does not match");
        }
    }
    return eta;
}

inline json model_spec_to_json(const ModelSpec& spec) {
    json j = {{"kind", to_string(spec.kind)}, {"theta0", spec.theta0}};
    if (spec.kind == ModelKind::parametric_shift_exp) {
        j["lambda"] = spec.lambda;
    } else {
        j["eta0"] = density_to_json(*spec.eta0);
    }
    return j;
}

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string spec_hash(const ModelSpec& spec) {
    return hex64(fnv1a(model_spec_to_json(spec).dump()));
}

// ---------------------------------------------------------------------------
// Dataset CSV: comment header, then one observation per row.

inline void write_dataset_csv(std::ostream& os, const Dataset& data, const std::string& hash) {
    os << "# seed=" << data.seed << '\n';
    os << "# spec_hash=" << hash << '\n';
    os << "x\n";
    char buf[40];
    for (const double v : data.x) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << '\n';
    }
}

struct DatasetFile {
    Dataset data;
    std::string spec_hash;
};

inline DatasetFile read_dataset_csv(std::istream& is) {
    DatasetFile out;
    std::uint64_t seed = 0;
    std::vector<double> x;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.rfind("# seed=", 0) == 0) {
            seed = std::stoull(line.substr(7));
        } else if (line.rfind("# spec_hash=", 0) == 0) {
            out.spec_hash = line.substr(12);
        } else if (line[0] == '#') {
            continue;
        } else if (!header_seen) {
            if (line != "x") throw std::runtime_error("read_dataset_csv: expected header 'x'");
            header_seen = true;
        } else {
            x.push_back(std::stod(line));
        }
    }
    out.data = Dataset::from(std::move(x), seed);
    return out;
}

// ---------------------------------------------------------------------------
// Diagnostics.

inline json to_json(const HellingerRateReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json jr = {{"n", row.n},
                   {"max_scaled", row.max_scaled},
                   {"mean_scaled", row.mean_scaled},
                   {"per_draw", row.per_draw}};
        if (!std::isnan(row.closed_form)) jr["closed_form"] = row.closed_form;
        rows.push_back(std::move(jr));
    }
    return {{"h", r.h},           {"rows", rows},
            {"growth", r.growth}, {"threshold", r.threshold},
            {"bounded", r.bounded}, {"convention", "H^2 = int (sqrt p - sqrt q)^2"}};
}

inline json to_json(const KlDiagnostics& d) {
    return {{"rho", d.rho},
            {"M", d.M},
            {"n", d.n},
            {"h_grid_size", d.h_grid_size},
            {"k_m1", d.k_m1},
            {"k_m2", d.k_m2},
            {"kn_m1", d.kn_m1},
            {"kn_m2", d.kn_m2},
            {"off_grid_modulus", d.off_grid_modulus},
            {"in_K", d.in_K},
            {"in_Kn", d.in_Kn},
            {"in_Kn_conservative", d.in_Kn_conservative},
            {"fitted_L1", d.fitted_L1},
            {"fitted_L2", d.fitted_L2},
            {"fitted_L2_conservative", d.fitted_L2_conservative},
            {"note", "sup over |h| <= M taken on the h grid; conservative flags add the "
                     "log-Lipschitz modulus m M / n"}};
}

inline json to_json(const IntBoundsReport& r) {
    return {{"eps", r.eps},     {"integral", r.integral},
            {"lower", r.lower}, {"upper", r.upper},
            {"abs_derivative_integral", r.abs_derivative_integral},
            {"passed", r.passed}};
}

inline json to_json(const MarginalLrProbe& p) {
    return {{"M_n", p.M_n},
            {"sup_value", std::isfinite(p.sup_value) ? json(p.sup_value) : json(nullptr)},
            {"sup_theta", std::isfinite(p.sup_theta) ? json(p.sup_theta) : json(nullptr)},
            {"label", MarginalLrProbe::label}};
}

/// Wraps a diagnostic payload with its (spec hash, seed, n) key.
inline json keyed_report(const std::string& hash, std::uint64_t seed, std::size_t n,
                         json payload) {
    return {{"spec_hash", hash}, {"seed", seed}, {"n", n}, {"report", std::move(payload)}};
}

}  // namespace laebvm::io
