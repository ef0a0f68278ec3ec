#pragma once

// Experiment configuration: strict JSON parsing (unknown keys are fatal and
// name the offending field), defaults materialized into a resolved document
// that reports embed verbatim.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "diffmetric/common.hpp"
#include "diffmetric/diffusion.hpp"
#include "diffmetric/dynamics.hpp"
#include "diffmetric/geometry.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/synth.hpp"

namespace diffmetric {

using ojson = nlohmann::ordered_json;

struct MethodConfig {
    std::string name;
    double eta = 0.01;
    std::size_t steps = 100;
    std::size_t batch_size = 1;  // sgd
    bool epoch_shuffle = false;  // sgd
    InverseMode inverse = InverseMode::WeakField;
    ChristoffelMode christoffel = ChristoffelMode::WeakField;
    RunOptions::V0Policy v0_policy = RunOptions::V0Policy::MetricGradient;
    Vec v0;
};

struct ModelConfig {
    std::string architecture;  // quadratic | linear_regression | two_layer
    std::size_t hidden_width = 2;
    TwoLayerModel::Activation activation = TwoLayerModel::Activation::Tanh;
    std::string dataset_path;       // as written in the config
    std::string dataset_resolved;   // relative paths resolved against the config dir
    std::optional<SyntheticSpec> synthetic;
    double init_scale = 0.5;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;  // sgd seeds; defaults to {seed}
    LossConvention convention = LossConvention::Sum;
    EpsilonPolicy eps{};
    DiffusionForm form = DiffusionForm::Pairwise;
    std::size_t pairwise_cap = 512;
    std::size_t cadence = 1;
    std::string output_dir = "out";
    ModelConfig model;
    std::vector<MethodConfig> methods;  // canonical order: gd, sgd, rgd, geodesic
    ojson resolved;
};

namespace detail {

[[noreturn]] inline void cfg_fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config: " + path + ": " + msg);
}

inline std::string join_path(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const ojson& obj, const std::string& path,
                       const std::set<std::string>& allowed) {
    if (!obj.is_object()) cfg_fail(path.empty() ? "(root)" : path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) cfg_fail(join_path(path, it.key()), "unknown key");
    }
}

inline const ojson* opt(const ojson& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline double as_num(const ojson& v, const std::string& path) {
    if (!v.is_number()) cfg_fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) cfg_fail(path, "must be finite");
    return x;
}

inline std::size_t as_uint(const ojson& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
        return static_cast<std::size_t>(v.get<long long>());
    }
    cfg_fail(path, "expected a non-negative integer");
}

inline std::uint64_t as_seed(const ojson& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
        return static_cast<std::uint64_t>(v.get<long long>());
    }
    cfg_fail(path, "expected a non-negative integer seed");
}

inline bool as_bool(const ojson& v, const std::string& path) {
    if (!v.is_boolean()) cfg_fail(path, "expected a boolean");
    return v.get<bool>();
}

inline std::string as_str(const ojson& v, const std::string& path) {
    if (!v.is_string()) cfg_fail(path, "expected a string");
    return v.get<std::string>();
}

inline Vec as_vec(const ojson& v, const std::string& path) {
    if (!v.is_array() || v.empty()) cfg_fail(path, "expected a non-empty array of numbers");
    Vec out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as_num(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline InverseMode as_inverse_mode(const ojson& v, const std::string& path) {
    const std::string s = as_str(v, path);
    if (s == "weak_field") return InverseMode::WeakField;
    if (s == "exact") return InverseMode::Exact;
    cfg_fail(path, "expected 'weak_field' or 'exact'");
}

inline ChristoffelMode as_christoffel_mode(const ojson& v, const std::string& path) {
    const std::string s = as_str(v, path);
    if (s == "weak_field") return ChristoffelMode::WeakField;
    if (s == "exact_fd") return ChristoffelMode::ExactFd;
    cfg_fail(path, "expected 'weak_field' or 'exact_fd'");
}

}  // namespace detail

inline SyntheticSpec parse_synthetic_spec(const ojson& obj, const std::string& path) {
    using namespace detail;
    check_keys(obj, path,
               {"kind", "num_samples", "dim", "noise_sigma", "shared_feature", "separation"});
    SyntheticSpec spec;
    if (const auto* v = opt(obj, "kind")) spec.kind = as_str(*v, join_path(path, "kind"));
    if (spec.kind != "linear" && spec.kind != "two_cluster") {
        cfg_fail(join_path(path, "kind"), "expected 'linear' or 'two_cluster'");
    }
    if (const auto* v = opt(obj, "num_samples")) {
        spec.num_samples = as_uint(*v, join_path(path, "num_samples"));
        if (spec.num_samples < 1) cfg_fail(join_path(path, "num_samples"), "must be >= 1");
    }
    if (const auto* v = opt(obj, "dim")) {
        spec.dim = as_uint(*v, join_path(path, "dim"));
        if (spec.dim < 1) cfg_fail(join_path(path, "dim"), "must be >= 1");
    }
    if (const auto* v = opt(obj, "noise_sigma")) {
        spec.noise_sigma = as_num(*v, join_path(path, "noise_sigma"));
        if (spec.noise_sigma < 0.0) cfg_fail(join_path(path, "noise_sigma"), "must be >= 0");
    }
    if (const auto* v = opt(obj, "shared_feature")) {
        if (spec.kind != "linear") {
            cfg_fail(join_path(path, "shared_feature"), "only valid for kind 'linear'");
        }
        spec.shared_feature = as_bool(*v, join_path(path, "shared_feature"));
    }
    if (const auto* v = opt(obj, "separation")) {
        if (spec.kind != "two_cluster") {
            cfg_fail(join_path(path, "separation"), "only valid for kind 'two_cluster'");
        }
        spec.separation = as_num(*v, join_path(path, "separation"));
        if (spec.separation <= 0.0) cfg_fail(join_path(path, "separation"), "must be > 0");
    }
    return spec;
}

namespace detail {

inline void parse_epsilon(const ojson& obj, const std::string& path, EpsilonPolicy& eps) {
    check_keys(obj, path, {"c", "floor", "frozen", "per_point"});
    if (const auto* v = opt(obj, "c")) {
        eps.c = as_num(*v, join_path(path, "c"));
        if (!(eps.c > 0.0 && eps.c < 1.0)) cfg_fail(join_path(path, "c"), "must be in (0, 1)");
    }
    if (const auto* v = opt(obj, "floor")) {
        eps.floor = as_num(*v, join_path(path, "floor"));
        if (eps.floor <= 0.0) cfg_fail(join_path(path, "floor"), "must be > 0");
    }
    bool frozen = false;
    std::optional<bool> per_point;
    if (const auto* v = opt(obj, "frozen")) frozen = as_bool(*v, join_path(path, "frozen"));
    if (const auto* v = opt(obj, "per_point")) per_point = as_bool(*v, join_path(path, "per_point"));
    if (frozen && per_point && *per_point) {
        cfg_fail(path, "frozen and per_point are mutually exclusive");
    }
    if (!frozen && per_point && !*per_point) {
        cfg_fail(path, "enable exactly one of frozen or per_point");
    }
    eps.frozen = frozen;
}

inline ModelConfig parse_model(const ojson& obj, const std::string& path,
                               const std::filesystem::path& base_dir) {
    check_keys(obj, path, {"architecture", "hidden_width", "activation", "dataset", "synthetic", "init"});
    ModelConfig mc;
    const auto* arch = opt(obj, "architecture");
    if (!arch) cfg_fail(join_path(path, "architecture"), "required");
    mc.architecture = as_str(*arch, join_path(path, "architecture"));
    if (mc.architecture != "quadratic" && mc.architecture != "linear_regression" &&
        mc.architecture != "two_layer") {
        cfg_fail(join_path(path, "architecture"),
                 "expected 'quadratic', 'linear_regression' or 'two_layer'");
    }
    if (const auto* v = opt(obj, "hidden_width")) {
        if (mc.architecture != "two_layer") {
            cfg_fail(join_path(path, "hidden_width"), "only valid for architecture 'two_layer'");
        }
        mc.hidden_width = as_uint(*v, join_path(path, "hidden_width"));
        if (mc.hidden_width < 1) cfg_fail(join_path(path, "hidden_width"), "must be >= 1");
    }
    if (const auto* v = opt(obj, "activation")) {
        if (mc.architecture != "two_layer") {
            cfg_fail(join_path(path, "activation"), "only valid for architecture 'two_layer'");
        }
        const std::string s = as_str(*v, join_path(path, "activation"));
        if (s == "tanh") {
            mc.activation = TwoLayerModel::Activation::Tanh;
        } else if (s == "identity") {
            mc.activation = TwoLayerModel::Activation::Identity;
        } else {
            cfg_fail(join_path(path, "activation"), "expected 'tanh' or 'identity'");
        }
    }
    const auto* ds = opt(obj, "dataset");
    const auto* syn = opt(obj, "synthetic");
    if ((ds != nullptr) == (syn != nullptr)) {
        cfg_fail(path, "exactly one of dataset or synthetic is required");
    }
    if (ds) {
        mc.dataset_path = as_str(*ds, join_path(path, "dataset"));
        std::filesystem::path p(mc.dataset_path);
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) {
            cfg_fail(join_path(path, "dataset"), "file not found: " + p.string());
        }
        mc.dataset_resolved = p.string();
    } else {
        mc.synthetic = parse_synthetic_spec(*syn, join_path(path, "synthetic"));
    }
    if (const auto* v = opt(obj, "init")) {
        const std::string ipath = join_path(path, "init");
        check_keys(*v, ipath, {"scale"});
        if (const auto* s = opt(*v, "scale")) {
            mc.init_scale = as_num(*s, join_path(ipath, "scale"));
            if (mc.init_scale <= 0.0) cfg_fail(join_path(ipath, "scale"), "must be > 0");
        }
    }
    return mc;
}

inline MethodConfig parse_method(const std::string& name, const ojson& obj,
                                 const std::string& path) {
    std::set<std::string> allowed = {"eta", "steps"};
    if (name == "sgd") {
        allowed.insert("batch_size");
        allowed.insert("epoch_shuffle");
    }
    if (name == "rgd" || name == "geodesic") allowed.insert("inverse_mode");
    if (name == "geodesic") {
        allowed.insert("christoffel_mode");
        allowed.insert("v0_policy");
        allowed.insert("v0");
    }
    check_keys(obj, path, allowed);
    MethodConfig m;
    m.name = name;
    if (const auto* v = opt(obj, "eta")) {
        m.eta = as_num(*v, join_path(path, "eta"));
        if (m.eta <= 0.0) cfg_fail(join_path(path, "eta"), "must be > 0");
    }
    if (const auto* v = opt(obj, "steps")) {
        m.steps = as_uint(*v, join_path(path, "steps"));
        if (m.steps < 1) cfg_fail(join_path(path, "steps"), "must be >= 1");
    }
    if (const auto* v = opt(obj, "batch_size")) {
        m.batch_size = as_uint(*v, join_path(path, "batch_size"));
        if (m.batch_size < 1) cfg_fail(join_path(path, "batch_size"), "must be >= 1");
    }
    if (const auto* v = opt(obj, "epoch_shuffle")) {
        m.epoch_shuffle = as_bool(*v, join_path(path, "epoch_shuffle"));
    }
    if (const auto* v = opt(obj, "inverse_mode")) {
        m.inverse = as_inverse_mode(*v, join_path(path, "inverse_mode"));
    }
    if (const auto* v = opt(obj, "christoffel_mode")) {
        m.christoffel = as_christoffel_mode(*v, join_path(path, "christoffel_mode"));
    }
    if (const auto* v = opt(obj, "v0_policy")) {
        const std::string s = as_str(*v, join_path(path, "v0_policy"));
        if (s == "metric_gradient") {
            m.v0_policy = RunOptions::V0Policy::MetricGradient;
        } else if (s == "zero") {
            m.v0_policy = RunOptions::V0Policy::Zero;
        } else if (s == "custom") {
            m.v0_policy = RunOptions::V0Policy::Custom;
        } else {
            cfg_fail(join_path(path, "v0_policy"), "expected 'metric_gradient', 'zero' or 'custom'");
        }
    }
    if (const auto* v = opt(obj, "v0")) {
        if (m.v0_policy != RunOptions::V0Policy::Custom) {
            cfg_fail(join_path(path, "v0"), "only valid with v0_policy 'custom'");
        }
        m.v0 = as_vec(*v, join_path(path, "v0"));
    }
    if (m.v0_policy == RunOptions::V0Policy::Custom && m.v0.empty()) {
        cfg_fail(join_path(path, "v0"), "required when v0_policy is 'custom'");
    }
    return m;
}

inline ojson resolved_document(const ExperimentConfig& cfg) {
    ojson out;
    out["seed"] = cfg.seed;
    out["seeds"] = cfg.seeds;
    out["loss_convention"] = cfg.convention == LossConvention::Sum ? "sum" : "mean";
    ojson eps;
    eps["c"] = cfg.eps.c;
    eps["floor"] = cfg.eps.floor;
    eps["frozen"] = cfg.eps.frozen;
    eps["per_point"] = !cfg.eps.frozen;
    out["epsilon"] = std::move(eps);
    out["diffusion_form"] = cfg.form == DiffusionForm::Pairwise ? "pairwise" : "variance";
    out["pairwise_cap"] = cfg.pairwise_cap;
    out["cadence"] = cfg.cadence;
    out["output_dir"] = cfg.output_dir;
    ojson model;
    model["architecture"] = cfg.model.architecture;
    if (cfg.model.architecture == "two_layer") {
        model["hidden_width"] = cfg.model.hidden_width;
        model["activation"] = cfg.model.activation == TwoLayerModel::Activation::Tanh ? "tanh" : "identity";
    }
    if (cfg.model.synthetic) {
        const auto& s = *cfg.model.synthetic;
        ojson syn;
        syn["kind"] = s.kind;
        syn["num_samples"] = s.num_samples;
        syn["dim"] = s.dim;
        syn["noise_sigma"] = s.noise_sigma;
        if (s.kind == "linear") syn["shared_feature"] = s.shared_feature;
        if (s.kind == "two_cluster") syn["separation"] = s.separation;
        model["synthetic"] = std::move(syn);
    } else {
        model["dataset"] = cfg.model.dataset_path;
    }
    model["init"] = ojson{{"scale", cfg.model.init_scale}};
    out["model"] = std::move(model);
    ojson methods;
    for (const auto& m : cfg.methods) {
        ojson mo;
        mo["eta"] = m.eta;
        mo["steps"] = m.steps;
        if (m.name == "sgd") {
            mo["batch_size"] = m.batch_size;
            mo["epoch_shuffle"] = m.epoch_shuffle;
        }
        if (m.name == "rgd" || m.name == "geodesic") {
            mo["inverse_mode"] = m.inverse == InverseMode::WeakField ? "weak_field" : "exact";
        }
        if (m.name == "geodesic") {
            mo["christoffel_mode"] =
                m.christoffel == ChristoffelMode::WeakField ? "weak_field" : "exact_fd";
            switch (m.v0_policy) {
                case RunOptions::V0Policy::MetricGradient: mo["v0_policy"] = "metric_gradient"; break;
                case RunOptions::V0Policy::Zero: mo["v0_policy"] = "zero"; break;
                case RunOptions::V0Policy::Custom:
                    mo["v0_policy"] = "custom";
                    mo["v0"] = m.v0;
                    break;
            }
        }
        methods[m.name] = std::move(mo);
    }
    out["methods"] = std::move(methods);
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_json(const ojson& root,
                                              const std::filesystem::path& base_dir) {
    using namespace detail;
    check_keys(root, "", {"seed", "seeds", "loss_convention", "epsilon", "diffusion_form",
                          "pairwise_cap", "cadence", "output_dir", "model", "methods"});
    ExperimentConfig cfg;
    if (const auto* v = opt(root, "seed")) cfg.seed = as_seed(*v, "seed");
    if (const auto* v = opt(root, "seeds")) {
        if (!v->is_array() || v->empty()) cfg_fail("seeds", "expected a non-empty array");
        for (std::size_t i = 0; i < v->size(); ++i) {
            cfg.seeds.push_back(as_seed((*v)[i], "seeds[" + std::to_string(i) + "]"));
        }
    } else {
        cfg.seeds = {cfg.seed};
    }
    if (const auto* v = opt(root, "loss_convention")) {
        const std::string s = as_str(*v, "loss_convention");
        if (s == "sum") {
            cfg.convention = LossConvention::Sum;
        } else if (s == "mean") {
            cfg.convention = LossConvention::Mean;
        } else {
            cfg_fail("loss_convention", "expected 'sum' or 'mean'");
        }
    }
    if (const auto* v = opt(root, "epsilon")) parse_epsilon(*v, "epsilon", cfg.eps);
    if (const auto* v = opt(root, "diffusion_form")) {
        const std::string s = as_str(*v, "diffusion_form");
        if (s == "pairwise") {
            cfg.form = DiffusionForm::Pairwise;
        } else if (s == "variance") {
            cfg.form = DiffusionForm::Variance;
        } else {
            cfg_fail("diffusion_form", "expected 'pairwise' or 'variance'");
        }
    }
    if (const auto* v = opt(root, "pairwise_cap")) {
        cfg.pairwise_cap = as_uint(*v, "pairwise_cap");
        if (cfg.pairwise_cap < 2) cfg_fail("pairwise_cap", "must be >= 2");
    }
    if (const auto* v = opt(root, "cadence")) {
        cfg.cadence = as_uint(*v, "cadence");
        if (cfg.cadence < 1) cfg_fail("cadence", "must be >= 1");
    }
    if (const auto* v = opt(root, "output_dir")) cfg.output_dir = as_str(*v, "output_dir");
    const auto* model = opt(root, "model");
    if (!model) cfg_fail("model", "required");
    cfg.model = parse_model(*model, "model", base_dir);
    const auto* methods = opt(root, "methods");
    if (!methods) cfg_fail("methods", "required");
    check_keys(*methods, "methods", {"gd", "sgd", "rgd", "geodesic"});
    for (const char* name : {"gd", "sgd", "rgd", "geodesic"}) {
        if (const auto* v = opt(*methods, name)) {
            cfg.methods.push_back(parse_method(name, *v, join_path("methods", name)));
        }
    }
    if (cfg.methods.empty()) cfg_fail("methods", "at least one method is required");
    cfg.resolved = detail::resolved_document(cfg);
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    ojson root;
    try {
        root = ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_experiment_json(root, std::filesystem::path(path).parent_path());
}

inline SyntheticSpec parse_synthetic_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    ojson root;
    try {
        root = ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_synthetic_spec(root, "");
}

}  // namespace diffmetric
