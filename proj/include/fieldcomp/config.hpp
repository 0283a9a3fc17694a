#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"

#include "fieldcomp/ann.hpp"
#include "fieldcomp/errors.hpp"
#include "fieldcomp/metrics.hpp"
#include "fieldcomp/simulator.hpp"

namespace fieldcomp {

// Tool-level configuration: the scenario family plus knobs for each
// subcommand. Every level rejects unrecognized keys so typos fail loudly
// instead of silently reverting to defaults.

struct GenerateConfig {
    int n_runs = 7;
    std::vector<int> points_per_beam{7, 7, 7, 7, 6, 6, 6};
};

struct PcaToolConfig {
    int n_components = 1;
};

struct BenchmarkToolConfig {
    std::vector<MethodSpec> methods{
        {"grid", 8, 2},  {"grid", 8, 3}, {"grid", 8, 4}, {"grid", 8, 6}, {"grid", 8, 10},
        {"planes", 3, 3}, {"planes", 8, 3}, {"pca", 8, 3}, {"ann9", 8, 3}, {"ann4", 8, 3},
    };
    int n_trials = 500;
    int ann9_epochs = 25;
    int ann4_epochs = 120;
};

struct ToolConfig {
    ScenarioConfig scenario;
    GenerateConfig generate;
    PcaToolConfig pca;
    Hyperparams ann;
    BenchmarkToolConfig benchmark;
};

namespace detail {

inline void require_object(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + " must be a JSON object");
}

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& path) {
    require_object(j, path);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + path);
    }
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + path);
    }
}

inline Vec3 get_vec3(const nlohmann::json& j, const char* key, Vec3 fallback,
                     const std::string& path) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw ConfigError("'" + std::string(key) + "' in " + path + " must be an array of 3");
    try {
        return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + path);
    }
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["beam_mode"] = cfg.beam_mode;
    j["beams"] = nlohmann::json::array();
    for (Vec3 b : cfg.beams) j["beams"].push_back({b.x, b.y, b.z});
    j["beam_perturbation"] = cfg.beam_perturbation;
    j["coupling_mode"] = cfg.coupling_mode;
    j["coupling"] = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        j["coupling"].push_back({cfg.coupling.m[r][0], cfg.coupling.m[r][1], cfg.coupling.m[r][2]});
    j["mean"] = {cfg.mean.x, cfg.mean.y, cfg.mean.z};
    j["dominance"] = cfg.dominance;
    j["spread"] = cfg.spread;
    j["noise_sigma"] = cfg.noise_sigma;
    j["bounds_half"] = cfg.bounds_half;
    j["scan_fraction"] = cfg.scan_fraction;
    return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& path) {
    detail::reject_unknown_keys(j,
                                {"beam_mode", "beams", "beam_perturbation", "coupling_mode",
                                 "coupling", "coupling_jitter", "mean", "dominance", "spread",
                                 "noise_sigma", "bounds_half", "scan_fraction"},
                                path);
    ScenarioConfig cfg;
    cfg.beam_mode = detail::get_field<std::string>(j, "beam_mode", cfg.beam_mode, path);
    if (j.contains("beams")) {
        const auto& a = j.at("beams");
        if (!a.is_array() || a.size() != 3)
            throw ConfigError("'beams' in " + path + " must be an array of 3 direction vectors");
        for (int b = 0; b < 3; ++b) {
            const auto& v = a.at(b);
            if (!v.is_array() || v.size() != 3)
                throw ConfigError("'beams' in " + path + " must be an array of 3 direction vectors");
            try {
                cfg.beams[b] = {v.at(0).get<double>(), v.at(1).get<double>(),
                                v.at(2).get<double>()};
            } catch (const nlohmann::json::exception&) {
                throw ConfigError("bad value for 'beams' in " + path);
            }
        }
    }
    cfg.beam_perturbation =
        detail::get_field<double>(j, "beam_perturbation", cfg.beam_perturbation, path);
    cfg.coupling_mode = detail::get_field<std::string>(j, "coupling_mode", cfg.coupling_mode, path);
    if (j.contains("coupling")) {
        const auto& a = j.at("coupling");
        if (!a.is_array() || a.size() != 3)
            throw ConfigError("'coupling' in " + path + " must be a 3x3 matrix");
        for (int r = 0; r < 3; ++r) {
            const auto& row = a.at(r);
            if (!row.is_array() || row.size() != 3)
                throw ConfigError("'coupling' in " + path + " must be a 3x3 matrix");
            try {
                for (int c = 0; c < 3; ++c) cfg.coupling.m[r][c] = row.at(c).get<double>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError("bad value for 'coupling' in " + path);
            }
        }
    }
    cfg.coupling_jitter = detail::get_field<double>(j, "coupling_jitter", cfg.coupling_jitter, path);
    cfg.mean = detail::get_vec3(j, "mean", cfg.mean, path);
    cfg.dominance = detail::get_field<double>(j, "dominance", cfg.dominance, path);
    cfg.spread = detail::get_field<double>(j, "spread", cfg.spread, path);
    cfg.noise_sigma = detail::get_field<double>(j, "noise_sigma", cfg.noise_sigma, path);
    cfg.bounds_half = detail::get_field<double>(j, "bounds_half", cfg.bounds_half, path);
    cfg.scan_fraction = detail::get_field<double>(j, "scan_fraction", cfg.scan_fraction, path);
    return cfg;
}

inline nlohmann::json hyperparams_to_json(const Hyperparams& h) {
    return {{"hidden", h.hidden},
            {"epochs", h.epochs},
            {"learning_rate", h.learning_rate},
            {"beta1", h.beta1},
            {"beta2", h.beta2},
            {"epsilon", h.epsilon},
            {"plateau_epochs", h.plateau_epochs},
            {"plateau_rel", h.plateau_rel}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j, const std::string& path) {
    detail::reject_unknown_keys(j,
                                {"hidden", "epochs", "learning_rate", "beta1", "beta2", "epsilon",
                                 "plateau_epochs", "plateau_rel"},
                                path);
    Hyperparams h;
    h.hidden = detail::get_field<std::vector<int>>(j, "hidden", h.hidden, path);
    h.epochs = detail::get_field<int>(j, "epochs", h.epochs, path);
    h.learning_rate = detail::get_field<double>(j, "learning_rate", h.learning_rate, path);
    h.beta1 = detail::get_field<double>(j, "beta1", h.beta1, path);
    h.beta2 = detail::get_field<double>(j, "beta2", h.beta2, path);
    h.epsilon = detail::get_field<double>(j, "epsilon", h.epsilon, path);
    h.plateau_epochs = detail::get_field<int>(j, "plateau_epochs", h.plateau_epochs, path);
    h.plateau_rel = detail::get_field<double>(j, "plateau_rel", h.plateau_rel, path);
    if (h.epochs < 1) throw ConfigError("'epochs' in " + path + " must be >= 1");
    if (h.hidden.empty()) throw ConfigError("'hidden' in " + path + " must name at least one layer");
    for (int w : h.hidden)
        if (w < 1) throw ConfigError("'hidden' in " + path + " must contain positive widths");
    return h;
}

inline nlohmann::json method_spec_to_json(const MethodSpec& m) {
    nlohmann::json j{{"method", m.method}};
    if (m.method == "grid") j["n_per_axis"] = m.n_per_axis;
    if (m.method == "planes") j["points_per_beam"] = m.points_per_beam;
    return j;
}

inline MethodSpec method_spec_from_json(const nlohmann::json& j, const std::string& path) {
    detail::require_object(j, path);
    MethodSpec spec;
    spec.method = detail::get_field<std::string>(j, "method", "", path);
    if (spec.method == "grid") {
        detail::reject_unknown_keys(j, {"method", "n_per_axis"}, path);
        spec.n_per_axis = detail::get_field<int>(j, "n_per_axis", spec.n_per_axis, path);
        if (spec.n_per_axis < 2) throw ConfigError("'n_per_axis' in " + path + " must be >= 2");
    } else if (spec.method == "planes") {
        detail::reject_unknown_keys(j, {"method", "points_per_beam"}, path);
        spec.points_per_beam =
            detail::get_field<int>(j, "points_per_beam", spec.points_per_beam, path);
        if (spec.points_per_beam < 3)
            throw ConfigError("'points_per_beam' in " + path + " must be >= 3");
    } else if (spec.method == "pca" || spec.method == "ann9" || spec.method == "ann4") {
        detail::reject_unknown_keys(j, {"method"}, path);
    } else {
        throw ConfigError("unknown method '" + spec.method + "' in " + path);
    }
    return spec;
}

inline nlohmann::json tool_config_to_json(const ToolConfig& cfg) {
    nlohmann::json j;
    j["scenario"] = scenario_to_json(cfg.scenario);
    j["generate"] = {{"n_runs", cfg.generate.n_runs},
                     {"points_per_beam", cfg.generate.points_per_beam}};
    j["pca"] = {{"n_components", cfg.pca.n_components}};
    j["ann"] = hyperparams_to_json(cfg.ann);
    nlohmann::json methods = nlohmann::json::array();
    for (const MethodSpec& m : cfg.benchmark.methods) methods.push_back(method_spec_to_json(m));
    j["benchmark"] = {{"methods", methods},
                      {"n_trials", cfg.benchmark.n_trials},
                      {"ann9_epochs", cfg.benchmark.ann9_epochs},
                      {"ann4_epochs", cfg.benchmark.ann4_epochs}};
    return j;
}

inline ToolConfig tool_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"scenario", "generate", "pca", "ann", "benchmark"}, "config");
    ToolConfig cfg;
    if (j.contains("scenario")) cfg.scenario = scenario_from_json(j.at("scenario"), "scenario");
    if (j.contains("generate")) {
        const auto& g = j.at("generate");
        detail::reject_unknown_keys(g, {"n_runs", "points_per_beam"}, "generate");
        cfg.generate.n_runs = detail::get_field<int>(g, "n_runs", cfg.generate.n_runs, "generate");
        if (cfg.generate.n_runs < 1) throw ConfigError("'n_runs' in generate must be >= 1");
        if (g.contains("points_per_beam")) {
            const auto& p = g.at("points_per_beam");
            if (p.is_number_integer()) {
                cfg.generate.points_per_beam.assign(cfg.generate.n_runs, p.get<int>());
            } else if (p.is_array()) {
                try {
                    cfg.generate.points_per_beam = p.get<std::vector<int>>();
                } catch (const nlohmann::json::exception&) {
                    throw ConfigError("bad value for 'points_per_beam' in generate");
                }
            } else {
                throw ConfigError("'points_per_beam' in generate must be an int or int array");
            }
        } else if (static_cast<int>(cfg.generate.points_per_beam.size()) != cfg.generate.n_runs) {
            // Default schedule only fits the default run count.
            cfg.generate.points_per_beam.assign(cfg.generate.n_runs, 7);
        }
        if (static_cast<int>(cfg.generate.points_per_beam.size()) != cfg.generate.n_runs)
            throw ConfigError("'points_per_beam' in generate must have n_runs entries");
        for (int p : cfg.generate.points_per_beam)
            if (p < 3) throw ConfigError("'points_per_beam' in generate must be >= 3 per run");
    }
    if (j.contains("pca")) {
        const auto& p = j.at("pca");
        detail::reject_unknown_keys(p, {"n_components"}, "pca");
        cfg.pca.n_components = detail::get_field<int>(p, "n_components", cfg.pca.n_components, "pca");
        if (cfg.pca.n_components < 1 || cfg.pca.n_components > 3)
            throw ConfigError("'n_components' in pca must be between 1 and 3");
    }
    if (j.contains("ann")) cfg.ann = hyperparams_from_json(j.at("ann"), "ann");
    if (j.contains("benchmark")) {
        const auto& b = j.at("benchmark");
        detail::reject_unknown_keys(b, {"methods", "n_trials", "ann9_epochs", "ann4_epochs"},
                                    "benchmark");
        if (b.contains("methods")) {
            const auto& arr = b.at("methods");
            if (!arr.is_array()) throw ConfigError("'methods' in benchmark must be an array");
            cfg.benchmark.methods.clear();
            for (std::size_t i = 0; i < arr.size(); ++i)
                cfg.benchmark.methods.push_back(method_spec_from_json(
                    arr.at(i), "benchmark.methods[" + std::to_string(i) + "]"));
            if (cfg.benchmark.methods.empty())
                throw ConfigError("'methods' in benchmark must not be empty");
        }
        cfg.benchmark.n_trials =
            detail::get_field<int>(b, "n_trials", cfg.benchmark.n_trials, "benchmark");
        if (cfg.benchmark.n_trials < 2) throw ConfigError("'n_trials' in benchmark must be >= 2");
        cfg.benchmark.ann9_epochs =
            detail::get_field<int>(b, "ann9_epochs", cfg.benchmark.ann9_epochs, "benchmark");
        cfg.benchmark.ann4_epochs =
            detail::get_field<int>(b, "ann4_epochs", cfg.benchmark.ann4_epochs, "benchmark");
        if (cfg.benchmark.ann9_epochs < 1 || cfg.benchmark.ann4_epochs < 1)
            throw ConfigError("ANN epoch overrides in benchmark must be >= 1");
    }
    validate_scenario_config(cfg.scenario);
    return cfg;
}

inline ToolConfig parse_tool_config(const std::string& text, const std::string& source) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + source + ": " + e.what());
    }
    return tool_config_from_json(j);
}

// FNV-1a over the canonical serialization; stamped into run sidecars so a
// training set can be traced back to the exact configuration that made it.
inline std::string config_hash(const ToolConfig& cfg) {
    std::string dump = tool_config_to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

inline BenchmarkConfig make_benchmark_config(const ToolConfig& cfg) {
    BenchmarkConfig bc;
    bc.scenario = cfg.scenario;
    bc.methods = cfg.benchmark.methods;
    bc.n_trials = cfg.benchmark.n_trials;
    bc.run_schedule = cfg.generate.points_per_beam;
    bc.pca_components = cfg.pca.n_components;
    bc.ann = cfg.ann;
    bc.ann9_epochs = cfg.benchmark.ann9_epochs;
    bc.ann4_epochs = cfg.benchmark.ann4_epochs;
    return bc;
}

}  // namespace fieldcomp
