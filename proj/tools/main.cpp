// diffmetric CLI: run experiments, inspect the geometry at a point, and
// generate synthetic datasets. Exit codes: 0 ok, 1 config error, 2 numeric
// or I/O failure.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "diffmetric/diffmetric.hpp"

namespace {

diffmetric::Vec load_point(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw diffmetric::ConfigError("cannot open " + path);
    diffmetric::ojson root;
    try {
        root = diffmetric::ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw diffmetric::ConfigError(path + ": " + e.what());
    }
    const diffmetric::ojson* arr = &root;
    if (root.is_object()) {
        auto it = root.find("x");
        if (it == root.end()) {
            throw diffmetric::ConfigError(path + ": expected an array or an object with key 'x'");
        }
        arr = &*it;
    }
    if (!arr->is_array() || arr->empty()) {
        throw diffmetric::ConfigError(path + ": expected a non-empty numeric array");
    }
    diffmetric::Vec x;
    x.reserve(arr->size());
    for (const auto& v : *arr) {
        if (!v.is_number()) throw diffmetric::ConfigError(path + ": expected numbers");
        x.push_back(v.get<double>());
    }
    return x;
}

int cmd_run(const std::string& config_path, const std::string& out_override, bool dry_run) {
    diffmetric::ExperimentConfig cfg = diffmetric::parse_config_file(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (dry_run) {
        std::cout << diffmetric::plan_text(cfg);
        return 0;
    }
    const diffmetric::ExperimentResult res = diffmetric::run_experiment(cfg);
    const auto files = diffmetric::emit_outputs(res, cfg.output_dir);
    std::cout << "wrote " << cfg.output_dir << "/report.json (" << files.size() << " files)\n";
    return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& at_path) {
    const diffmetric::ExperimentConfig cfg = diffmetric::parse_config_file(config_path);
    const diffmetric::Vec x = load_point(at_path);
    std::cout << diffmetric::diagnose_json(cfg, x).dump(2) << '\n';
    return 0;
}

int cmd_gen_data(const std::string& spec_path, std::uint64_t seed, const std::string& out_path) {
    const diffmetric::SyntheticSpec spec = diffmetric::parse_synthetic_file(spec_path);
    const diffmetric::Dataset ds = diffmetric::generate_synthetic(spec, seed);
    diffmetric::write_dataset_csv(ds, out_path);
    std::cout << "wrote " << out_path << " (" << ds.size() << " samples, "
              << ds.feature_dim() << " features)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-metric optimization dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    bool dry_run = false;
    auto* run = app.add_subcommand("run", "run the experiment described by a config");
    run->add_option("config", config_path, "JSON config file")->required();
    run->add_option("--out", out_override, "override the configured output directory");
    run->add_flag("--dry-run", dry_run, "validate and print the plan without writing anything");

    std::string diag_config;
    std::string at_path;
    auto* diagnose = app.add_subcommand("diagnose", "print the geometry at a point");
    diagnose->add_option("config", diag_config, "JSON config file")->required();
    diagnose->add_option("--at", at_path, "JSON file with the point to inspect")->required();

    std::string spec_path;
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
    gen->add_option("spec", spec_path, "JSON generator spec")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_override, dry_run);
        if (diagnose->parsed()) return cmd_diagnose(diag_config, at_path);
        if (gen->parsed()) return cmd_gen_data(spec_path, gen_seed, gen_out);
        return 1;
    } catch (const diffmetric::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
