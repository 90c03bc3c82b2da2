#pragma once

// Experiment configuration: strict JSON in, normalized JSON (all defaults
// filled) out. The config hash covers everything except output_dir and
// threads, which do not affect results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "laebvm/io.hpp"
#include "laebvm/models.hpp"
#include "laebvm/posterior.hpp"
#include "laebvm/priors.hpp"

namespace laebvm::harness {

using json = nlohmann::json;

/// Invalid configuration; field() names the offending key path.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument("config error at '" + field + "': " + message),
          field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class Experiment {
    risk,
    bvm_parametric,
    bvm_shift,
    bvm_scale,
    lae_check,
    hellinger_rate,
    kl_diag,
    prior_check
};

inline const std::vector<std::pair<Experiment, const char*>>& experiment_names() {
    static const std::vector<std::pair<Experiment, const char*>> names = {
        {Experiment::risk, "risk"},
        {Experiment::bvm_parametric, "bvm_parametric"},
        {Experiment::bvm_shift, "bvm_shift"},
        {Experiment::bvm_scale, "bvm_scale"},
        {Experiment::lae_check, "lae_check"},
        {Experiment::hellinger_rate, "hellinger_rate"},
        {Experiment::kl_diag, "kl_diag"},
        {Experiment::prior_check, "prior_check"}};
    return names;
}

inline const char* to_string(Experiment e) {
    for (const auto& [k, name] : experiment_names()) {
        if (k == e) return name;
    }
    return "?";
}

struct ScoreSpec {
    std::string type = "constant";  // constant | sine | values
    double value = 0.0;
    double amplitude = 0.0;
    double frequency = 1.0;
    std::vector<double> values;
    std::size_t nodes = kDefaultScoreNodes;
};

struct ModelBlock {
    ModelKind kind = ModelKind::parametric_shift_exp;
    double theta0 = 0.0;
    double lambda = 1.0;
    double alpha = 1.0;
    /// Score bound: the ball radius for shift, the transform's S for scale.
    double S = 0.5;
    ScoreSpec score;
};

struct ThetaPriorBlock {
    std::string type = "gaussian";  // gaussian | uniform | grid
    double mean = 0.0;
    double sd = 1.0;
    double a = 0.0;
    double b = 1.0;
    std::vector<double> x;
    std::vector<double> density;
};

struct ScorePriorBlock {
    double S = 0.5;
    ScorePriorVariant variant = ScorePriorVariant::compactified;
    std::size_t grid_size = kDefaultScoreNodes;
};

struct Options {
    std::vector<double> h_values;
    double rho = 0.5;
    double M = 1.0;
    double threshold = 0.10;
    bool integrated_lae = false;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::risk;
    ModelBlock model;
    ThetaPriorBlock theta_prior;
    ScorePriorBlock score_prior;
    std::vector<std::size_t> n_list;
    std::size_t replicates = 1;
    std::size_t nuisance_draws = 500;
    GridConfig grid;
    std::uint64_t master_seed = 0;
    std::string output_dir;
    std::size_t threads = 1;
    Options options;
};

// ---------------------------------------------------------------------------
// Building library objects from a config.

inline ScoreFunction build_score(const ScoreSpec& s, DomainKind domain, double bound) {
    if (s.type == "constant") return ScoreFunction::constant(domain, s.value, bound, s.nodes);
    if (s.type == "sine") {
        const double amp = s.amplitude;
        const double freq = s.frequency;
        return ScoreFunction::from_compact(
            domain, [=](double u) { return amp * std::sin(2.0 * std::numbers::pi * freq * u); },
            bound, s.nodes);
    }
    return {domain, ScoreFunction::uniform_grid(s.values.size()), s.values, bound};
}

inline ModelSpec build_model(const ModelBlock& m) {
    switch (m.kind) {
        case ModelKind::parametric_shift_exp: return ModelSpec::parametric(m.lambda, m.theta0);
        case ModelKind::semiparam_shift:
            return ModelSpec::shift(
                esscher_shift(build_score(m.score, DomainKind::half_line, m.S), m.alpha), m.theta0);
        case ModelKind::semiparam_scale:
            return ModelSpec::scale(
                esscher_scale(build_score(m.score, DomainKind::unit_interval, m.S), m.S),
                m.theta0);
    }
    throw std::logic_error("build_model: unknown kind");
}

inline ThetaPrior build_theta_prior(const ThetaPriorBlock& p) {
    if (p.type == "gaussian") return ThetaPrior::gaussian(p.mean, p.sd);
    if (p.type == "uniform") return ThetaPrior::uniform(p.a, p.b);
    return ThetaPrior::grid(p.x, p.density);
}

/// Turns a prior score draw into a nuisance density compatible with the model.
inline NuisanceDensity nuisance_from_score(const ModelBlock& m, const ScoreFunction& score) {
    if (m.kind == ModelKind::semiparam_scale) return esscher_scale(score, m.S);
    return esscher_shift(score, m.alpha);
}

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline void reject_unknown(const json& j, const std::string& path,
                           const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
        }
    }
}

inline bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline bool non_negative_integers(const json& v) {
    if (v.is_array()) {
        return std::all_of(v.begin(), v.end(), [](const json& e) { return non_negative_integer(e); });
    }
    return non_negative_integer(v);
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.contains(key)) return fallback;
    constexpr bool counts = std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> ||
                            std::is_same_v<T, std::vector<std::size_t>>;
    if constexpr (counts) {
        if (!non_negative_integers(j.at(key))) {
            throw ConfigError(path.empty() ? key : path + "." + key,
                              "expected non-negative integer(s)");
        }
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path.empty() ? key : path + "." + key, e.what());
    }
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
}

}  // namespace detail

inline ModelBlock default_model(Experiment e) {
    ModelBlock m;
    switch (e) {
        case Experiment::risk:
        case Experiment::bvm_parametric:
            m.kind = ModelKind::parametric_shift_exp;
            break;
        case Experiment::bvm_scale:
            m.kind = ModelKind::semiparam_scale;
            m.theta0 = 2.0;
            m.S = 1.0;
            break;
        case Experiment::lae_check:
            m.kind = ModelKind::semiparam_shift;
            m.score.type = "sine";
            m.score.amplitude = 0.4;
            m.score.frequency = 1.0;
            break;
        default:
            m.kind = ModelKind::semiparam_shift;
            break;
    }
    return m;
}

inline ExperimentConfig defaults_for(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    c.model = default_model(e);
    if (c.model.kind == ModelKind::semiparam_scale) c.score_prior.variant = ScorePriorVariant::unit_interval;
    switch (e) {
        case Experiment::risk:
            c.n_list = {50};
            c.replicates = 100000;
            break;
        case Experiment::bvm_parametric:
            c.n_list = {25, 100, 400};
            c.replicates = 200;
            break;
        case Experiment::bvm_shift:
            c.n_list = {50, 200};
            c.replicates = 100;
            break;
        case Experiment::bvm_scale:
            c.n_list = {50, 200};
            c.replicates = 100;
            c.theta_prior.type = "uniform";
            c.theta_prior.a = 0.5;
            c.theta_prior.b = 4.0;
            break;
        case Experiment::lae_check:
            c.n_list = {100, 1000, 10000};
            c.replicates = 200;
            c.options.h_values = {-1.0, 1.0};
            break;
        case Experiment::hellinger_rate:
            c.n_list = {100, 1000, 10000};
            c.replicates = 100;
            c.options.h_values = {1.0};
            break;
        case Experiment::kl_diag:
            c.n_list = {100};
            c.replicates = 100;
            break;
        case Experiment::prior_check:
            c.n_list = {kDefaultScoreNodes};
            c.replicates = 1000;
            break;
    }
    return c;
}

inline ScoreSpec parse_score(const json& j, const std::string& path, ScoreSpec s) {
    using namespace detail;
    reject_unknown(j, path, {"type", "value", "amplitude", "frequency", "values", "nodes"});
    s.type = get_or<std::string>(j, "type", path, s.type);
    require(s.type == "constant" || s.type == "sine" || s.type == "values", join(path, "type"),
            "must be one of constant, sine, values");
    s.value = get_or<double>(j, "value", path, s.value);
    s.amplitude = get_or<double>(j, "amplitude", path, s.amplitude);
    s.frequency = get_or<double>(j, "frequency", path, s.frequency);
    s.values = get_or<std::vector<double>>(j, "values", path, s.values);
    s.nodes = get_or<std::size_t>(j, "nodes", path, s.nodes);
    require(s.nodes >= 2, join(path, "nodes"), "must be >= 2");
    if (s.type == "values") {
        require(s.values.size() >= 2, join(path, "values"), "need >= 2 values");
        s.nodes = s.values.size();
    }
    return s;
}

inline ModelKind parse_model_kind(const std::string& s, const std::string& field) {
    if (s == "parametric_shift_exp") return ModelKind::parametric_shift_exp;
    if (s == "semiparam_shift") return ModelKind::semiparam_shift;
    if (s == "semiparam_scale") return ModelKind::semiparam_scale;
    throw ConfigError(field, "unknown model kind '" + s + "'");
}

inline ExperimentConfig parse_config(const json& root) {
    using namespace detail;
    reject_unknown(root, "",
                   {"experiment", "model", "prior", "n_list", "replicates", "nuisance_draws",
                    "grid", "master_seed", "output_dir", "threads", "options"});
    require(root.contains("experiment"), "experiment", "missing");
    const auto name = get_or<std::string>(root, "experiment", "", "");
    std::optional<Experiment> exp;
    for (const auto& [k, n] : experiment_names()) {
        if (name == n) exp = k;
    }
    require(exp.has_value(), "experiment", "unknown experiment '" + name + "'");
    ExperimentConfig c = defaults_for(*exp);
    require(root.contains("master_seed"), "master_seed", "missing (no wall-clock seeding)");
    c.master_seed = get_or<std::uint64_t>(root, "master_seed", "", 0);

    if (root.contains("model")) {
        const auto& m = root.at("model");
        reject_unknown(m, "model", {"kind", "theta0", "lambda", "alpha", "S", "score"});
        if (m.contains("kind")) {
            const auto kind = parse_model_kind(get_or<std::string>(m, "kind", "model", ""),
                                               "model.kind");
            if (kind != c.model.kind) {
                c.model = ModelBlock{};
                c.model.kind = kind;
                if (kind == ModelKind::semiparam_scale) {
                    c.model.theta0 = 2.0;
                    c.model.S = 1.0;
                }
            }
        }
        c.model.theta0 = get_or<double>(m, "theta0", "model", c.model.theta0);
        c.model.lambda = get_or<double>(m, "lambda", "model", c.model.lambda);
        c.model.alpha = get_or<double>(m, "alpha", "model", c.model.alpha);
        c.model.S = get_or<double>(m, "S", "model", c.model.S);
        if (m.contains("score")) c.model.score = parse_score(m.at("score"), "model.score", c.model.score);
    }
    if (c.model.kind == ModelKind::semiparam_scale && !root.contains("prior")) {
        c.theta_prior.type = "uniform";
        c.theta_prior.a = 0.25 * c.model.theta0;
        c.theta_prior.b = 2.0 * c.model.theta0;
    }
    c.score_prior.variant = c.model.kind == ModelKind::semiparam_scale
                                ? ScorePriorVariant::unit_interval
                                : ScorePriorVariant::compactified;

    if (root.contains("prior")) {
        const auto& p = root.at("prior");
        reject_unknown(p, "prior", {"theta", "score"});
        if (p.contains("theta")) {
            const auto& t = p.at("theta");
            reject_unknown(t, "prior.theta", {"type", "mean", "sd", "a", "b", "x", "density"});
            auto& tp = c.theta_prior;
            tp.type = get_or<std::string>(t, "type", "prior.theta", tp.type);
            require(tp.type == "gaussian" || tp.type == "uniform" || tp.type == "grid",
                    "prior.theta.type", "must be one of gaussian, uniform, grid");
            tp.mean = get_or<double>(t, "mean", "prior.theta", tp.mean);
            tp.sd = get_or<double>(t, "sd", "prior.theta", tp.sd);
            tp.a = get_or<double>(t, "a", "prior.theta", tp.a);
            tp.b = get_or<double>(t, "b", "prior.theta", tp.b);
            tp.x = get_or<std::vector<double>>(t, "x", "prior.theta", tp.x);
            tp.density = get_or<std::vector<double>>(t, "density", "prior.theta", tp.density);
        }
        if (p.contains("score")) {
            const auto& s = p.at("score");
            reject_unknown(s, "prior.score", {"S", "variant", "grid_size"});
            c.score_prior.S = get_or<double>(s, "S", "prior.score", c.score_prior.S);
            c.score_prior.grid_size =
                get_or<std::size_t>(s, "grid_size", "prior.score", c.score_prior.grid_size);
            if (s.contains("variant")) {
                const auto v = get_or<std::string>(s, "variant", "prior.score", "");
                if (v == "compactified") {
                    c.score_prior.variant = ScorePriorVariant::compactified;
                } else if (v == "unit_interval") {
                    c.score_prior.variant = ScorePriorVariant::unit_interval;
                } else {
                    throw ConfigError("prior.score.variant", "must be compactified or unit_interval");
                }
            }
        }
    }

    if (root.contains("n_list")) {
        c.n_list = get_or<std::vector<std::size_t>>(root, "n_list", "", {});
    }
    c.replicates = get_or<std::size_t>(root, "replicates", "", c.replicates);
    c.nuisance_draws = get_or<std::size_t>(root, "nuisance_draws", "", c.nuisance_draws);
    if (root.contains("grid")) {
        const auto& g = root.at("grid");
        reject_unknown(g, "grid", {"nodes", "span"});
        c.grid.nodes = get_or<std::size_t>(g, "nodes", "grid", c.grid.nodes);
        c.grid.span = get_or<double>(g, "span", "grid", c.grid.span);
    }
    c.output_dir = get_or<std::string>(root, "output_dir", "", "out/" + name);
    c.threads = get_or<std::size_t>(root, "threads", "", c.threads);
    if (root.contains("options")) {
        const auto& o = root.at("options");
        reject_unknown(o, "options", {"h_values", "rho", "M", "threshold", "integrated_lae"});
        c.options.h_values = get_or<std::vector<double>>(o, "h_values", "options", c.options.h_values);
        c.options.rho = get_or<double>(o, "rho", "options", c.options.rho);
        c.options.M = get_or<double>(o, "M", "options", c.options.M);
        c.options.threshold = get_or<double>(o, "threshold", "options", c.options.threshold);
        c.options.integrated_lae = get_or<bool>(o, "integrated_lae", "options", c.options.integrated_lae);
    }
    return c;
}

/// Enforces the invariants and checks that every object can be built.
inline void validate(const ExperimentConfig& c) {
    using detail::require;
    require(!c.n_list.empty(), "n_list", "must not be empty");
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
        require(c.n_list[i] >= 1, "n_list", "entries must be >= 1");
        if (i > 0) require(c.n_list[i] > c.n_list[i - 1], "n_list", "must be strictly increasing");
    }
    require(c.replicates >= 1, "replicates", "must be >= 1");
    require(c.threads >= 1, "threads", "must be >= 1");
    require(c.grid.nodes >= 16, "grid.nodes", "must be >= 16");
    require(c.grid.span > 0.0 && std::isfinite(c.grid.span), "grid.span", "must be positive");
    require(!c.output_dir.empty(), "output_dir", "must not be empty");

    const auto& m = c.model;
    require(std::isfinite(m.theta0), "model.theta0", "must be finite");
    try {
        (void)build_model(m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    const bool semi = m.kind != ModelKind::parametric_shift_exp;

    switch (c.experiment) {
        case Experiment::risk: break;
        case Experiment::bvm_parametric:
            require(!semi, "model.kind", "bvm_parametric needs parametric_shift_exp");
            break;
        case Experiment::bvm_shift:
            require(m.kind == ModelKind::semiparam_shift, "model.kind",
                    "bvm_shift needs semiparam_shift");
            break;
        case Experiment::bvm_scale:
            require(m.kind == ModelKind::semiparam_scale, "model.kind",
                    "bvm_scale needs semiparam_scale");
            break;
        case Experiment::lae_check:
            require(!c.options.h_values.empty(), "options.h_values", "must not be empty");
            break;
        case Experiment::hellinger_rate:
            require(c.options.h_values.size() == 1, "options.h_values", "needs exactly one h");
            break;
        case Experiment::kl_diag:
            require(semi, "model.kind", "kl_diag needs a semiparametric model");
            require(c.options.rho > 0.0, "options.rho", "must be positive");
            require(c.options.M >= 0.0, "options.M", "must be >= 0");
            break;
        case Experiment::prior_check: break;
    }

    const bool uses_theta_prior = c.experiment == Experiment::bvm_parametric ||
                                  c.experiment == Experiment::bvm_shift ||
                                  c.experiment == Experiment::bvm_scale;
    if (uses_theta_prior) {
        try {
            const auto prior = build_theta_prior(c.theta_prior);
            require(prior.thick_at(m.theta0), "prior.theta", "must be thick at theta0");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError("prior.theta", e.what());
        }
    }
    const bool uses_draws = semi && (uses_theta_prior || c.experiment == Experiment::hellinger_rate ||
                                     c.experiment == Experiment::kl_diag ||
                                     (c.experiment == Experiment::lae_check &&
                                      c.options.integrated_lae));
    if (uses_draws || c.experiment == Experiment::prior_check) {
        const auto& sp = c.score_prior;
        require(sp.S > 0.0, "prior.score.S", "must be positive");
        require(sp.grid_size >= 2, "prior.score.grid_size", "must be >= 2");
        if (uses_theta_prior || c.experiment == Experiment::kl_diag) {
            require(c.nuisance_draws >= 1 || c.experiment == Experiment::kl_diag, "nuisance_draws",
                    "must be >= 1");
        }
        if (semi) {
            const DomainKind want = m.kind == ModelKind::semiparam_scale ? DomainKind::unit_interval
                                                                         : DomainKind::half_line;
            const ScorePriorSampler probe{sp.S, sp.variant, sp.grid_size, 0};
            require(probe.domain() == want, "prior.score.variant",
                    "does not match the model's score domain");
            if (m.kind == ModelKind::semiparam_shift) {
                require(sp.S < m.alpha, "prior.score.S", "must be below model.alpha");
            } else {
                require(sp.S <= m.S, "prior.score.S", "must not exceed model.S");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Normalized form and hash.

inline json to_json(const ScoreSpec& s) {
    json j = {{"type", s.type}, {"nodes", s.nodes}};
    if (s.type == "constant") j["value"] = s.value;
    if (s.type == "sine") {
        j["amplitude"] = s.amplitude;
        j["frequency"] = s.frequency;
    }
    if (s.type == "values") j["values"] = s.values;
    return j;
}

inline json to_json(const ExperimentConfig& c) {
    json model = {{"kind", to_string(c.model.kind)}, {"theta0", c.model.theta0}};
    if (c.model.kind == ModelKind::parametric_shift_exp) {
        model["lambda"] = c.model.lambda;
    } else {
        model["S"] = c.model.S;
        model["score"] = to_json(c.model.score);
        if (c.model.kind == ModelKind::semiparam_shift) model["alpha"] = c.model.alpha;
    }
    const auto& tp = c.theta_prior;
    json theta = {{"type", tp.type}};
    if (tp.type == "gaussian") {
        theta["mean"] = tp.mean;
        theta["sd"] = tp.sd;
    } else if (tp.type == "uniform") {
        theta["a"] = tp.a;
        theta["b"] = tp.b;
    } else {
        theta["x"] = tp.x;
        theta["density"] = tp.density;
    }
    json score = {{"S", c.score_prior.S},
                  {"variant", c.score_prior.variant == ScorePriorVariant::compactified
                                  ? "compactified"
                                  : "unit_interval"},
                  {"grid_size", c.score_prior.grid_size}};
    return {{"experiment", to_string(c.experiment)},
            {"model", model},
            {"prior", {{"theta", theta}, {"score", score}}},
            {"n_list", c.n_list},
            {"replicates", c.replicates},
            {"nuisance_draws", c.nuisance_draws},
            {"grid", {{"nodes", c.grid.nodes}, {"span", c.grid.span}}},
            {"master_seed", c.master_seed},
            {"output_dir", c.output_dir},
            {"threads", c.threads},
            {"options",
             {{"h_values", c.options.h_values},
              {"rho", c.options.rho},
              {"M", c.options.M},
              {"threshold", c.options.threshold},
              {"integrated_lae", c.options.integrated_lae}}}};
}

inline std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    j.erase("threads");
    return io::hex64(fnv1a(j.dump()));
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    json root;
    try {
        in >> root;
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

/// validate_config: parse, fill defaults, enforce invariants.
inline ExperimentConfig validate_config(const std::string& path) {
    auto c = load_config(path);
    validate(c);
    return c;
}

}  // namespace laebvm::harness
