#pragma once

// JSON run configuration: which models to use, how to assemble them, and the
// sampling parameters. Every key is optional except the model source
// (`benchmark`, or `hf_model` + `lf_models` + `inputs`); unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lfmc/benchmarks.hpp"
#include "lfmc/errors.hpp"
#include "lfmc/external_model.hpp"
#include "lfmc/input_distribution.hpp"
#include "lfmc/model_probability.hpp"
#include "lfmc/subset_simulation.hpp"
#include "lfmc/surrogate.hpp"

namespace lfmc {

struct AppConfig {
    std::optional<bench::Benchmark> benchmark;
    std::optional<ExternalModelSpec> hf_model;
    std::vector<ExternalModelSpec> lf_models;
    std::vector<Marginal> inputs;  // external models only; benchmarks fix their own

    Strategy strategy = Strategy::lfds;
    double beta = 0.0;
    std::optional<std::vector<double>> gamma_override;

    RunConfig run;
    std::string output_dir = "lfmc-out";

    bool operator==(const AppConfig&) const = default;

    [[nodiscard]] std::size_t dim() const { return benchmark ? 2 : inputs.size(); }
    [[nodiscard]] std::size_t n_models() const {
        if (benchmark) return *benchmark == bench::Benchmark::four_branch ? 4 : 2;
        return lf_models.size();
    }

    /// Cross-field checks; field-local checks happen while parsing.
    void validate() const {
        if (benchmark && (hf_model || !lf_models.empty() || !inputs.empty()))
            throw ConfigError("benchmark", "cannot be combined with hf_model, lf_models or inputs");
        if (!benchmark) {
            if (!hf_model) throw ConfigError("hf_model", "required when no benchmark is given");
            if (lf_models.empty()) throw ConfigError("lf_models", "at least one LF model is required");
            if (inputs.empty()) throw ConfigError("inputs", "at least one input marginal is required");
            check_model("hf_model", *hf_model);
            for (std::size_t i = 0; i < lf_models.size(); ++i)
                check_model("lf_models[" + std::to_string(i) + "]", lf_models[i]);
        }
        if (!(beta >= 0.0)) throw ConfigError("beta", "must be non-negative");
        if (gamma_override) {
            if (gamma_override->size() != n_models())
                throw ConfigError("gamma_override", "needs one entry per LF model (" +
                                                        std::to_string(n_models()) + ")");
            for (double g : *gamma_override)
                if (!(g >= 1.0)) throw ConfigError("gamma_override", "entries must be >= 1");
        }
        if (n_models() > 32) throw ConfigError("lf_models", "at most 32 LF models are supported");
        if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
        run.validate(dim());
    }

private:
    void check_model(const std::string& field, const ExternalModelSpec& m) const {
        if (m.command.empty()) throw ConfigError(field + ".command", "must name an executable");
        if (!(m.timeout > 0.0)) throw ConfigError(field + ".timeout", "must be positive");
        if (!(m.tau > 0.0)) throw ConfigError(field + ".tau", "must be positive");
        if (m.input_indices.empty()) throw ConfigError(field + ".input_indices", "must not be empty");
        for (std::size_t k : m.input_indices)
            if (k >= inputs.size())
                throw ConfigError(field + ".input_indices",
                                  "index " + std::to_string(k) + " is outside the " +
                                      std::to_string(inputs.size()) + " inputs");
    }
};

namespace detail {

using nlohmann::json;

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError(prefix + key, "unknown field");
    }
}

inline const json& object_at(const json& j, const std::string& field) {
    if (!j.is_object()) throw ConfigError(field, "must be an object");
    return j;
}

inline double get_real(const json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = lower(j.get<std::string>());
        if (s == "inf" || s == "infinity") return kInf;
    }
    throw ConfigError(field, "must be a number");
}

inline long long get_integer(const json& j, const std::string& field) {
    if (j.is_number_integer()) return j.get<long long>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
    }
    throw ConfigError(field, "must be an integer");
}

inline int get_int(const json& j, const std::string& field) {
    const long long v = get_integer(j, field);
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(field, "is out of range");
    return static_cast<int>(v);
}

inline std::vector<double> get_reals(const json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field, "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_real(j[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::string get_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw ConfigError(field, "must be a string");
    return j.get<std::string>();
}

inline Strategy parse_strategy(const std::string& text, const std::string& field) {
    const auto s = lower(text);
    if (s == "lfma") return Strategy::lfma;
    if (s == "lfds") return Strategy::lfds;
    if (s == "lfss") return Strategy::lfss;
    throw ConfigError(field, "unknown strategy '" + text + "' (expected LFMA, LFDS or LFSS)");
}

inline ExternalModelSpec parse_model(const json& j, const std::string& field, bool is_lf) {
    object_at(j, field);
    if (is_lf)
        reject_unknown(j, field + ".", {"command", "input_indices", "timeout", "tau"});
    else
        reject_unknown(j, field + ".", {"command", "input_indices", "timeout"});
    ExternalModelSpec m;
    if (!j.contains("command")) throw ConfigError(field + ".command", "is required");
    const auto& cmd = j["command"];
    if (cmd.is_string()) {
        m.command = {cmd.get<std::string>()};
    } else if (cmd.is_array()) {
        for (std::size_t i = 0; i < cmd.size(); ++i)
            m.command.push_back(get_string(cmd[i], field + ".command[" + std::to_string(i) + "]"));
    } else {
        throw ConfigError(field + ".command", "must be a string or an array of strings");
    }
    if (!j.contains("input_indices")) throw ConfigError(field + ".input_indices", "is required");
    const auto& idx = j["input_indices"];
    if (!idx.is_array()) throw ConfigError(field + ".input_indices", "must be an array of integers");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto v = get_integer(idx[i], field + ".input_indices[" + std::to_string(i) + "]");
        if (v < 0) throw ConfigError(field + ".input_indices", "indices must be non-negative");
        m.input_indices.push_back(static_cast<std::size_t>(v));
    }
    if (j.contains("timeout")) m.timeout = get_real(j["timeout"], field + ".timeout");
    if (j.contains("tau")) m.tau = get_real(j["tau"], field + ".tau");
    return m;
}

inline Marginal parse_marginal(const json& j, const std::string& field) {
    object_at(j, field);
    if (!j.contains("distribution")) throw ConfigError(field + ".distribution", "is required");
    const auto kind = lower(get_string(j["distribution"], field + ".distribution"));
    Marginal m;
    auto need = [&](const char* key) {
        if (!j.contains(key)) throw ConfigError(field + "." + key, "is required");
        return get_real(j[key], field + "." + key);
    };
    if (kind == "normal") {
        reject_unknown(j, field + ".", {"distribution", "mean", "std"});
        m = {Marginal::Kind::normal, need("mean"), need("std")};
        if (!(m.b > 0.0)) throw ConfigError(field + ".std", "must be positive");
    } else if (kind == "lognormal") {
        reject_unknown(j, field + ".", {"distribution", "log_mean", "log_std"});
        m = {Marginal::Kind::lognormal, need("log_mean"), need("log_std")};
        if (!(m.b > 0.0)) throw ConfigError(field + ".log_std", "must be positive");
    } else if (kind == "uniform") {
        reject_unknown(j, field + ".", {"distribution", "lower", "upper"});
        m = {Marginal::Kind::uniform, need("lower"), need("upper")};
        if (!(m.b > m.a)) throw ConfigError(field + ".upper", "must exceed lower");
    } else {
        throw ConfigError(field + ".distribution", "unknown distribution '" + kind + "'");
    }
    if (!std::isfinite(m.a) || !std::isfinite(m.b)) throw ConfigError(field, "parameters must be finite");
    return m;
}

inline nlohmann::ordered_json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline nlohmann::ordered_json model_to_json(const ExternalModelSpec& m, bool is_lf) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    j["command"] = m.command;
    j["input_indices"] = m.input_indices;
    j["timeout"] = m.timeout;
    if (is_lf) j["tau"] = m.tau;
    return j;
}

inline nlohmann::ordered_json marginal_to_json(const Marginal& m) {
    switch (m.kind) {
        case Marginal::Kind::normal: return {{"distribution", "normal"}, {"mean", m.a}, {"std", m.b}};
        case Marginal::Kind::lognormal:
            return {{"distribution", "lognormal"}, {"log_mean", m.a}, {"log_std", m.b}};
        case Marginal::Kind::uniform: return {{"distribution", "uniform"}, {"lower", m.a}, {"upper", m.b}};
    }
    return {};
}

}  // namespace detail

/// Parses and validates a configuration document.
inline AppConfig parse_config(const nlohmann::json& j) {
    using detail::get_int;
    using detail::get_real;
    if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
    detail::reject_unknown(j, "", {"benchmark", "hf_model", "lf_models", "inputs", "strategy", "beta",
                                   "gamma_override", "n_init", "n_pts", "n_chains", "pi_target",
                                   "failure_threshold", "u_threshold", "max_subsets", "proposal_scale", "seed",
                                   "seed_selection", "gp", "output_dir"});
    AppConfig c;
    if (j.contains("benchmark")) {
        const auto name = detail::get_string(j["benchmark"], "benchmark");
        try {
            c.benchmark = bench::benchmark_from_string(name);
        } catch (const InputError&) {
            throw ConfigError("benchmark", "unknown benchmark '" + name +
                                               "' (expected four_branch, rastrigin_type1 or rastrigin_type2)");
        }
    }
    if (j.contains("hf_model")) c.hf_model = detail::parse_model(j["hf_model"], "hf_model", false);
    if (j.contains("lf_models")) {
        if (!j["lf_models"].is_array()) throw ConfigError("lf_models", "must be an array");
        for (std::size_t i = 0; i < j["lf_models"].size(); ++i)
            c.lf_models.push_back(
                detail::parse_model(j["lf_models"][i], "lf_models[" + std::to_string(i) + "]", true));
    }
    if (j.contains("inputs")) {
        if (!j["inputs"].is_array()) throw ConfigError("inputs", "must be an array");
        for (std::size_t i = 0; i < j["inputs"].size(); ++i)
            c.inputs.push_back(detail::parse_marginal(j["inputs"][i], "inputs[" + std::to_string(i) + "]"));
    }
    if (j.contains("strategy"))
        c.strategy = detail::parse_strategy(detail::get_string(j["strategy"], "strategy"), "strategy");
    if (j.contains("beta")) c.beta = get_real(j["beta"], "beta");
    if (j.contains("gamma_override") && !j["gamma_override"].is_null())
        c.gamma_override = detail::get_reals(j["gamma_override"], "gamma_override");

    RunConfig& r = c.run;
    if (j.contains("n_init")) r.n_init = get_int(j["n_init"], "n_init");
    if (j.contains("n_pts")) r.n_pts = get_int(j["n_pts"], "n_pts");
    if (j.contains("n_chains")) r.n_chains = get_int(j["n_chains"], "n_chains");
    if (j.contains("pi_target")) r.pi_target = get_real(j["pi_target"], "pi_target");
    if (j.contains("failure_threshold")) r.failure_threshold = get_real(j["failure_threshold"], "failure_threshold");
    if (j.contains("u_threshold")) r.u_threshold = get_real(j["u_threshold"], "u_threshold");
    if (j.contains("max_subsets")) r.max_subsets = get_int(j["max_subsets"], "max_subsets");
    if (j.contains("proposal_scale")) {
        if (j["proposal_scale"].is_number())
            r.proposal_scale.assign(c.dim(), get_real(j["proposal_scale"], "proposal_scale"));
        else
            r.proposal_scale = detail::get_reals(j["proposal_scale"], "proposal_scale");
    }
    if (j.contains("seed")) {
        const auto& s = j["seed"];
        if (s.is_number_unsigned())
            r.seed = s.get<std::uint64_t>();
        else if (s.is_number_integer() && s.get<long long>() >= 0)
            r.seed = static_cast<std::uint64_t>(s.get<long long>());
        else
            throw ConfigError("seed", "must be a non-negative integer");
    }
    if (j.contains("seed_selection")) {
        const auto s = detail::lower(detail::get_string(j["seed_selection"], "seed_selection"));
        if (s == "random")
            r.seed_selection = SeedSelection::random;
        else if (s == "lowest_response")
            r.seed_selection = SeedSelection::lowest_response;
        else
            throw ConfigError("seed_selection", "expected 'random' or 'lowest_response'");
    }
    if (j.contains("gp")) {
        const auto& g = detail::object_at(j["gp"], "gp");
        detail::reject_unknown(g, "gp.", {"kernel", "n_starts", "reoptimize_stride", "retrain_starts",
                                          "max_optimizer_evaluations", "retrain_step", "retrain_tolerance"});
        if (g.contains("kernel")) {
            const auto k = detail::lower(detail::get_string(g["kernel"], "gp.kernel"));
            if (k == "squared_exponential")
                r.kernel = gp::KernelFamily::squared_exponential;
            else if (k == "matern52")
                r.kernel = gp::KernelFamily::matern52;
            else
                throw ConfigError("gp.kernel", "expected 'squared_exponential' or 'matern52'");
        }
        if (g.contains("n_starts")) r.n_starts = get_int(g["n_starts"], "gp.n_starts");
        if (g.contains("reoptimize_stride")) r.reoptimize_stride = get_int(g["reoptimize_stride"], "gp.reoptimize_stride");
        if (g.contains("retrain_starts")) r.retrain_starts = get_int(g["retrain_starts"], "gp.retrain_starts");
        if (g.contains("max_optimizer_evaluations"))
            r.max_optimizer_evaluations = get_int(g["max_optimizer_evaluations"], "gp.max_optimizer_evaluations");
        if (g.contains("retrain_step")) r.retrain_step = get_real(g["retrain_step"], "gp.retrain_step");
        if (g.contains("retrain_tolerance"))
            r.retrain_tolerance = get_real(g["retrain_tolerance"], "gp.retrain_tolerance");
    }
    if (j.contains("output_dir")) c.output_dir = detail::get_string(j["output_dir"], "output_dir");

    c.validate();
    return c;
}

inline AppConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline AppConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Full configuration with every default spelled out; parse_config of the
/// result reproduces `c` exactly.
inline nlohmann::ordered_json config_to_json(const AppConfig& c) {
    using detail::real_to_json;
    nlohmann::ordered_json j;
    if (c.benchmark) j["benchmark"] = bench::to_string(*c.benchmark);
    if (c.hf_model) j["hf_model"] = detail::model_to_json(*c.hf_model, false);
    if (!c.lf_models.empty()) {
        j["lf_models"] = nlohmann::ordered_json::array();
        for (const auto& m : c.lf_models) j["lf_models"].push_back(detail::model_to_json(m, true));
    }
    if (!c.inputs.empty()) {
        j["inputs"] = nlohmann::ordered_json::array();
        for (const auto& m : c.inputs) j["inputs"].push_back(detail::marginal_to_json(m));
    }
    j["strategy"] = to_string(c.strategy);
    j["beta"] = c.beta;
    if (c.gamma_override) j["gamma_override"] = *c.gamma_override;
    const RunConfig& r = c.run;
    j["n_init"] = r.n_init;
    j["n_pts"] = r.n_pts;
    j["n_chains"] = r.n_chains;
    j["pi_target"] = r.pi_target;
    j["failure_threshold"] = real_to_json(r.failure_threshold);
    j["u_threshold"] = real_to_json(r.u_threshold);
    j["max_subsets"] = r.max_subsets;
    if (!r.proposal_scale.empty()) j["proposal_scale"] = r.proposal_scale;
    j["seed"] = r.seed;
    j["seed_selection"] = r.seed_selection == SeedSelection::random ? "random" : "lowest_response";
    j["gp"] = {
        {"kernel", r.kernel == gp::KernelFamily::squared_exponential ? "squared_exponential" : "matern52"},
        {"n_starts", r.n_starts},
        {"reoptimize_stride", r.reoptimize_stride},
        {"retrain_starts", r.retrain_starts},
        {"max_optimizer_evaluations", r.max_optimizer_evaluations},
        {"retrain_step", r.retrain_step},
        {"retrain_tolerance", r.retrain_tolerance},
    };
    j["output_dir"] = c.output_dir;
    return j;
}

inline std::string serialize_config(const AppConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// Live models behind an ensemble. External children are owned here and
/// shut down when the last copy of the ensemble's evaluators goes away.
struct BuiltEnsemble {
    ModelEnsemble ensemble;
    std::vector<std::shared_ptr<ExternalModel>> processes;
};

inline BuiltEnsemble build_ensemble(const AppConfig& c) {
    c.validate();
    BuiltEnsemble out;
    ModelEnsemble& e = out.ensemble;
    if (c.benchmark) {
        e = bench::make_ensemble(*c.benchmark, c.strategy);
    } else {
        e.strategy = c.strategy;
        e.inputs = InputDistribution(c.inputs);
        auto attach = [&](int id, const ExternalModelSpec& spec) {
            auto proc = std::make_shared<ExternalModel>(spec);
            out.processes.push_back(proc);
            ModelHandle h;
            h.id = id;
            h.input_projection = spec.input_indices;
            h.cost_tau = spec.tau;
            h.evaluator = [proc](std::span<const double> x) { return proc->evaluate(x); };
            return h;
        };
        e.hf = attach(0, *c.hf_model);
        for (std::size_t i = 0; i < c.lf_models.size(); ++i)
            e.lfs.push_back(attach(static_cast<int>(i + 1), c.lf_models[i]));
    }
    std::vector<double> raw_tau;
    for (const auto& lf : e.lfs) raw_tau.push_back(lf.cost_tau);
    e.cost.tau = normalize_costs(raw_tau);
    e.cost.beta = c.beta;
    e.cost.gamma_override = c.gamma_override;
    e.validate();
    return out;
}

}  // namespace lfmc
