#pragma once

// Experiment orchestration. Builds the model from a validated config, runs
// each (method, seed) task on a bounded worker pool, compares trajectories
// pairwise, and emits report.json, per-run JSONL trajectories, and plot
// CSVs. Everything except wall_clock_seconds is a pure function of the
// config, so reruns are byte-identical.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diffmetric/config.hpp"
#include "diffmetric/dataset.hpp"
#include "diffmetric/diffusion.hpp"
#include "diffmetric/dynamics.hpp"
#include "diffmetric/geometry.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/synth.hpp"

namespace diffmetric {

inline Dataset materialize_dataset(const ExperimentConfig& cfg) {
    if (cfg.model.synthetic) return generate_synthetic(*cfg.model.synthetic, cfg.seed);
    return load_dataset_csv(cfg.model.dataset_resolved);
}

inline std::unique_ptr<LossModel> build_model(const ModelConfig& mc, Dataset ds) {
    if (mc.architecture == "quadratic") return std::make_unique<QuadraticModel>(std::move(ds));
    if (mc.architecture == "linear_regression") {
        return std::make_unique<LinearRegressionModel>(std::move(ds));
    }
    return std::make_unique<TwoLayerModel>(std::move(ds), mc.hidden_width, mc.activation);
}

inline Vec initial_point(std::size_t dim, std::uint64_t seed, double scale) {
    Rng rng(derive_seed(seed, 0x1417ull));
    Vec x(dim);
    for (auto& v : x) v = scale * rng.normal();
    return x;
}

// ---------------------------------------------------------------- work pool

inline std::size_t worker_count(std::size_t tasks) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 4;
    if (const char* env = std::getenv("DIFFMETRIC_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (env[0] == '\0' || env[0] == '-' || end == nullptr || *end != '\0' || v < 1) {
            throw ConfigError("DIFFMETRIC_THREADS must be a positive integer");
        }
        cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, tasks));
}

/// Runs body(0..tasks-1) on up to worker_count(tasks) threads. Results must
/// go into preassigned slots so scheduling order cannot leak into output.
template <typename F>
inline void run_pool(std::size_t tasks, F&& body) {
    const std::size_t workers = worker_count(tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto loop = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// ------------------------------------------------------ trajectory algebra

struct PathwiseMetrics {
    double sup_distance = 0.0;
    double l2_distance = 0.0;
    double terminal_loss_gap = 0.0;
};

namespace detail {

inline Vec interp_x(const Trajectory& tr, double t) {
    const auto& r = tr.records;
    if (t <= r.front().t) return r.front().x;
    if (t >= r.back().t) return r.back().x;
    std::size_t hi = 1;
    while (r[hi].t < t) ++hi;
    const auto& a = r[hi - 1];
    const auto& b = r[hi];
    const double w = (t - a.t) / (b.t - a.t);
    Vec out(a.x.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (1.0 - w) * a.x[k] + w * b.x[k];
    return out;
}

inline double grid_spacing(const Trajectory& tr) {
    const auto& r = tr.records;
    if (r.size() < 2) return 0.0;
    return (r.back().t - r.front().t) / static_cast<double>(r.size() - 1);
}

}  // namespace detail

/// Sup / RMS pathwise distance on the coarser of the two time grids
/// (restricted to the overlap), plus the gap between terminal losses.
inline PathwiseMetrics compare_trajectories(const Trajectory& a, const Trajectory& b) {
    if (a.records.empty() || b.records.empty()) {
        throw ConfigError("compare_trajectories: empty trajectory");
    }
    const double lo = std::max(a.records.front().t, b.records.front().t);
    const double hi = std::min(a.records.back().t, b.records.back().t);
    if (!(hi >= lo)) throw ConfigError("compare_trajectories: disjoint time ranges");
    const Trajectory& coarse = detail::grid_spacing(a) >= detail::grid_spacing(b) ? a : b;
    const Trajectory& fine = (&coarse == &a) ? b : a;

    PathwiseMetrics out;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& rec : coarse.records) {
        if (rec.t < lo || rec.t > hi) continue;
        const Vec other = detail::interp_x(fine, rec.t);
        if (other.size() != rec.x.size()) {
            throw ConfigError("compare_trajectories: dimension mismatch");
        }
        double sq = 0.0;
        for (std::size_t k = 0; k < other.size(); ++k) {
            const double dxk = rec.x[k] - other[k];
            sq += dxk * dxk;
        }
        out.sup_distance = std::max(out.sup_distance, std::sqrt(sq));
        sum_sq += sq;
        ++count;
    }
    if (count == 0) throw ConfigError("compare_trajectories: no grid points in overlap");
    out.l2_distance = std::sqrt(sum_sq / static_cast<double>(count));
    out.terminal_loss_gap = std::abs(a.records.back().loss - b.records.back().loss);
    return out;
}

/// Record-wise mean over same-grid trajectories (the sgd representative).
inline Trajectory mean_trajectory(const std::vector<Trajectory>& runs) {
    if (runs.empty()) throw ConfigError("mean_trajectory: no runs");
    const std::size_t nrec = runs[0].records.size();
    for (const auto& tr : runs) {
        if (tr.records.size() != nrec) throw ConfigError("mean_trajectory: grid mismatch");
    }
    Trajectory out;
    out.method = runs[0].method;
    out.records.resize(nrec);
    const double inv = 1.0 / static_cast<double>(runs.size());
    for (std::size_t r = 0; r < nrec; ++r) {
        TrajectoryRecord rec;
        rec.step = runs[0].records[r].step;
        rec.t = runs[0].records[r].t;
        rec.x.assign(runs[0].records[r].x.size(), 0.0);
        for (const auto& tr : runs) {
            const auto& src = tr.records[r];
            if (src.step != rec.step || src.x.size() != rec.x.size()) {
                throw ConfigError("mean_trajectory: grid mismatch");
            }
            for (std::size_t k = 0; k < rec.x.size(); ++k) rec.x[k] += src.x[k];
            rec.loss += src.loss;
            rec.grad_norm += src.grad_norm;
            for (const auto& [key, val] : src.diag) rec.diag[key] += val;
        }
        for (std::size_t k = 0; k < rec.x.size(); ++k) rec.x[k] *= inv;
        rec.loss *= inv;
        rec.grad_norm *= inv;
        for (auto& [key, val] : rec.diag) val *= inv;
        out.records[r] = std::move(rec);
    }
    return out;
}

// --------------------------------------------------------- point diagnostics

/// Full diagnostic bundle at one point; feeds report.json and `diagnose`.
inline std::map<std::string, double> point_diagnostics(const LossModel& model, const Vec& x,
                                                       const ExperimentConfig& cfg) {
    const double scale = convention_scale(cfg.convention, model.num_samples());
    DiffusionOptions dop;
    dop.form = cfg.form;
    dop.pairwise_cap = cfg.pairwise_cap;
    const Matrix d = diffusion_matrix(model, x, dop);
    const double lam = std::max(max_eigenvalue(d), 0.0);
    const double eps = select_epsilon(lam, cfg.eps.c, cfg.eps.floor);
    const DiffusionMetric metric(d, eps);
    Vec grad = model.total_grad(x);
    if (scale != 1.0) {
        for (double& v : grad) v *= scale;
    }
    std::map<std::string, double> out;
    out["lambda_max"] = lam;
    out["epsilon"] = eps;
    out["rank_D"] = static_cast<double>(numerical_rank(d));
    out["j_residual"] = j_residual(metric, grad, InverseMode::WeakField);
    if (model.num_samples() >= 2) {
        const ChristoffelField weak = christoffel_weak_field(model, x, eps);
        const ChristoffelField exact = christoffel_levi_civita_fd(model, x, eps, 1e-5, dop);
        out["christoffel_gap"] = max_abs_diff(weak, exact);
    } else {
        out["christoffel_gap"] = 0.0;
    }
    out["third_derivative_residual"] = third_derivative_residual(model, x);
    const Vec div = divergence_Dtilde(model, x, eps, 1e-4, dop);
    double dmax = 0.0;
    for (double v : div) dmax = std::max(dmax, std::abs(v));
    out["div_Dtilde_maxnorm"] = dmax;
    return out;
}

// ------------------------------------------------------------ run + results

struct MethodResult {
    std::string name;
    std::vector<std::uint64_t> seeds;  // sgd only; empty otherwise
    std::vector<Trajectory> runs;      // one per seed for sgd, one otherwise
    Trajectory representative;         // sgd: record-wise seed mean
};

struct ExperimentResult {
    ExperimentResult(ExperimentConfig c, Dataset d) : cfg(std::move(c)), dataset(std::move(d)) {}

    ExperimentConfig cfg;
    Dataset dataset;
    Vec x0;
    std::vector<MethodResult> methods;
    std::vector<std::pair<std::string, PathwiseMetrics>> pairs;
    std::map<std::string, double> diagnostics_at_x0;
    double lambda_max_min = 0.0;
    double lambda_max_max = 0.0;
    double j_residual_max = 0.0;
    std::size_t rank_d_max = 0;
    double wall_clock_seconds = 0.0;
};

namespace detail {

inline RunOptions assemble_run_options(const ExperimentConfig& cfg, const MethodConfig& m,
                                       std::uint64_t seed) {
    RunOptions opt;
    opt.eta = m.eta;
    opt.steps = m.steps;
    opt.cadence = cfg.cadence;
    opt.convention = cfg.convention;
    opt.eps = cfg.eps;
    opt.diffusion.form = cfg.form;
    opt.diffusion.pairwise_cap = cfg.pairwise_cap;
    opt.inverse = m.inverse;
    opt.christoffel = m.christoffel;
    opt.diagnostics = true;
    opt.batch = m.batch_size;
    opt.seed = seed;
    opt.epoch_shuffle = m.epoch_shuffle;
    opt.v0_policy = m.v0_policy;
    opt.v0_custom = m.v0;
    return opt;
}

inline Trajectory dispatch_method(const LossModel& model, const Vec& x0,
                                  const ExperimentConfig& cfg, const MethodConfig& m,
                                  std::uint64_t seed) {
    const RunOptions opt = assemble_run_options(cfg, m, seed);
    if (m.name == "gd") return run_gd(model, x0, opt);
    if (m.name == "sgd") return run_sgd(model, x0, opt);
    if (m.name == "rgd") return run_rgd_flow(model, x0, opt);
    if (m.name == "geodesic") return run_geodesic(model, x0, opt);
    throw ConfigError("unknown method '" + m.name + "'");
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    Dataset ds = materialize_dataset(cfg);
    const auto model = build_model(cfg.model, ds);
    for (const auto& m : cfg.methods) {
        if (m.name == "sgd" && m.batch_size > ds.size()) {
            throw ConfigError("config: methods.sgd.batch_size: must be <= N = " +
                              std::to_string(ds.size()));
        }
        if (m.name == "geodesic" && m.v0_policy == RunOptions::V0Policy::Custom &&
            m.v0.size() != model->dim()) {
            throw ConfigError("config: methods.geodesic.v0: expected " +
                              std::to_string(model->dim()) + " entries");
        }
    }

    ExperimentResult res(cfg, std::move(ds));
    res.x0 = initial_point(model->dim(), cfg.seed, cfg.model.init_scale);

    struct Task {
        std::size_t method = 0;
        std::size_t run = 0;
        std::uint64_t seed = 0;
    };
    std::vector<Task> tasks;
    res.methods.resize(cfg.methods.size());
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const auto& m = cfg.methods[mi];
        res.methods[mi].name = m.name;
        if (m.name == "sgd") {
            res.methods[mi].seeds = cfg.seeds;
            res.methods[mi].runs.resize(cfg.seeds.size());
            for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
                tasks.push_back({mi, si, cfg.seeds[si]});
            }
        } else {
            res.methods[mi].runs.resize(1);
            tasks.push_back({mi, 0, cfg.seed});
        }
    }

    const LossModel& model_ref = *model;
    run_pool(tasks.size(), [&](std::size_t i) {
        const Task& task = tasks[i];
        res.methods[task.method].runs[task.run] =
            detail::dispatch_method(model_ref, res.x0, cfg, cfg.methods[task.method], task.seed);
    });

    for (auto& mr : res.methods) {
        mr.representative = mr.name == "sgd" ? mean_trajectory(mr.runs) : mr.runs[0];
    }

    for (std::size_t i = 0; i < res.methods.size(); ++i) {
        for (std::size_t j = i + 1; j < res.methods.size(); ++j) {
            const std::string key = res.methods[i].name + "_vs_" + res.methods[j].name;
            res.pairs.emplace_back(
                key, compare_trajectories(res.methods[i].representative,
                                          res.methods[j].representative));
        }
    }

    res.diagnostics_at_x0 = point_diagnostics(model_ref, res.x0, cfg);
    bool first = true;
    for (const auto& mr : res.methods) {
        for (const auto& tr : mr.runs) {
            for (const auto& rec : tr.records) {
                const auto lam = rec.diag.find("lambda_max");
                if (lam != rec.diag.end()) {
                    if (first || lam->second < res.lambda_max_min) res.lambda_max_min = lam->second;
                    if (first || lam->second > res.lambda_max_max) res.lambda_max_max = lam->second;
                    first = false;
                }
                const auto jres = rec.diag.find("j_residual");
                if (jres != rec.diag.end()) {
                    res.j_residual_max = std::max(res.j_residual_max, jres->second);
                }
                const auto rank = rec.diag.find("rank_D");
                if (rank != rec.diag.end()) {
                    res.rank_d_max =
                        std::max(res.rank_d_max, static_cast<std::size_t>(rank->second));
                }
            }
        }
    }

    if (res.rank_d_max > res.dataset.size() - 1) {
        throw NumericError("rank(D) = " + std::to_string(res.rank_d_max) +
                           " exceeds N-1 = " + std::to_string(res.dataset.size() - 1));
    }

    const auto t_end = std::chrono::steady_clock::now();
    res.wall_clock_seconds = std::chrono::duration<double>(t_end - t_start).count();
    return res;
}

// ------------------------------------------------------------------ outputs

namespace detail {

inline ojson record_json(const TrajectoryRecord& rec) {
    ojson out;
    out["step"] = rec.step;
    out["t"] = rec.t;
    out["x"] = rec.x;
    if (rec.v) {
        out["v"] = *rec.v;
    } else {
        out["v"] = nullptr;
    }
    out["loss"] = rec.loss;
    out["grad_norm"] = rec.grad_norm;
    out["diag"] = rec.diag;
    return out;
}

inline void write_trajectory_jsonl(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericError("cannot open " + path + " for writing");
    for (const auto& rec : traj.records) {
        out << record_json(rec).dump() << '\n';
    }
}

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string trajectory_filename(const std::string& method, bool multi_seed,
                                       std::uint64_t seed) {
    if (!multi_seed) return method + ".jsonl";
    return method + "_seed" + std::to_string(seed) + ".jsonl";
}

}  // namespace detail

inline ojson report_json(const ExperimentResult& res) {
    ojson out;
    out["config"] = res.cfg.resolved;
    ojson dsj;
    dsj["num_samples"] = res.dataset.size();
    dsj["feature_dim"] = res.dataset.feature_dim();
    dsj["source"] = res.cfg.model.synthetic ? std::string("dataset.csv")
                                            : res.cfg.model.dataset_path;
    out["dataset"] = std::move(dsj);
    out["initial_point"] = res.x0;
    ojson methods;
    for (const auto& mr : res.methods) {
        ojson mj;
        if (mr.name == "sgd") {
            mj["seeds"] = mr.seeds;
            ojson files = ojson::array();
            for (std::size_t si = 0; si < mr.seeds.size(); ++si) {
                files.push_back(detail::trajectory_filename("sgd", true, mr.seeds[si]));
            }
            mj["trajectory_files"] = std::move(files);
            mj["mean_trajectory_file"] = "sgd_mean.jsonl";
            double mean = 0.0;
            for (const auto& tr : mr.runs) mean += tr.records.back().loss;
            mean /= static_cast<double>(mr.runs.size());
            double var = 0.0;
            for (const auto& tr : mr.runs) {
                const double dv = tr.records.back().loss - mean;
                var += dv * dv;
            }
            var /= static_cast<double>(mr.runs.size());
            mj["terminal_loss_mean"] = mean;
            mj["terminal_loss_std"] = std::sqrt(std::max(var, 0.0));
        } else {
            mj["trajectory_file"] = detail::trajectory_filename(mr.name, false, 0);
            mj["terminal_loss"] = mr.runs[0].records.back().loss;
        }
        mj["records"] = mr.representative.records.size();
        mj["terminal_grad_norm"] = mr.representative.records.back().grad_norm;
        methods[mr.name] = std::move(mj);
    }
    out["methods"] = std::move(methods);
    ojson pairs;
    for (const auto& [key, pm] : res.pairs) {
        ojson pj;
        pj["sup_distance"] = pm.sup_distance;
        pj["l2_distance"] = pm.l2_distance;
        pj["terminal_loss_gap"] = pm.terminal_loss_gap;
        pairs[key] = std::move(pj);
    }
    out["pairs"] = std::move(pairs);
    ojson diag;
    diag["at_initial_point"] = res.diagnostics_at_x0;
    diag["lambda_max_range"] = ojson::array({res.lambda_max_min, res.lambda_max_max});
    diag["rank_D_max"] = res.rank_d_max;
    diag["rank_bound"] = res.dataset.size() - 1;
    diag["j_residual_max"] = res.j_residual_max;
    diag["div_Dtilde_maxnorm"] = res.diagnostics_at_x0.at("div_Dtilde_maxnorm");
    diag["third_derivative_residual"] = res.diagnostics_at_x0.at("third_derivative_residual");
    out["diagnostics"] = std::move(diag);
    out["wall_clock_seconds"] = res.wall_clock_seconds;
    return out;
}

/// Writes the full output tree under out_dir; returns the relative paths.
inline std::vector<std::string> emit_outputs(const ExperimentResult& res,
                                             const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "plots");
    std::vector<std::string> files;

    if (res.cfg.model.synthetic) {
        write_dataset_csv(res.dataset, (fs::path(out_dir) / "dataset.csv").string());
        files.push_back("dataset.csv");
    }

    for (const auto& mr : res.methods) {
        const bool multi = mr.name == "sgd";
        for (std::size_t ri = 0; ri < mr.runs.size(); ++ri) {
            const std::string name =
                detail::trajectory_filename(mr.name, multi, multi ? mr.seeds[ri] : 0);
            detail::write_trajectory_jsonl((fs::path(out_dir) / name).string(), mr.runs[ri]);
            files.push_back(name);
        }
        if (multi) {
            detail::write_trajectory_jsonl((fs::path(out_dir) / "sgd_mean.jsonl").string(),
                                           mr.representative);
            files.push_back("sgd_mean.jsonl");
        }
    }

    // Common plotting grid: the coarsest representative grid, cut to the
    // shared time range, so every column is an honest interpolation.
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    const Trajectory* base = nullptr;
    for (const auto& mr : res.methods) {
        lo = std::max(lo, mr.representative.records.front().t);
        hi = std::min(hi, mr.representative.records.back().t);
        if (!base || detail::grid_spacing(mr.representative) > detail::grid_spacing(*base)) {
            base = &mr.representative;
        }
    }
    std::vector<double> grid;
    for (const auto& rec : base->records) {
        if (rec.t >= lo && rec.t <= hi) grid.push_back(rec.t);
    }

    {
        std::ofstream out(fs::path(out_dir) / "plots" / "loss.csv", std::ios::binary);
        out << "t";
        for (const auto& mr : res.methods) out << ",loss_" << mr.name;
        out << '\n';
        for (const double t : grid) {
            out << detail::fmt_g17(t);
            for (const auto& mr : res.methods) {
                // piecewise-linear loss along the recorded trajectory
                const auto& r = mr.representative.records;
                double loss;
                if (t <= r.front().t) {
                    loss = r.front().loss;
                } else if (t >= r.back().t) {
                    loss = r.back().loss;
                } else {
                    std::size_t k = 1;
                    while (r[k].t < t) ++k;
                    const double w = (t - r[k - 1].t) / (r[k].t - r[k - 1].t);
                    loss = (1.0 - w) * r[k - 1].loss + w * r[k].loss;
                }
                out << ',' << detail::fmt_g17(loss);
            }
            out << '\n';
        }
        files.push_back("plots/loss.csv");
    }

    if (!res.pairs.empty()) {
        std::ofstream out(fs::path(out_dir) / "plots" / "distance.csv", std::ios::binary);
        out << "t";
        for (const auto& [key, pm] : res.pairs) out << ',' << key;
        out << '\n';
        for (const double t : grid) {
            out << detail::fmt_g17(t);
            for (std::size_t i = 0; i < res.methods.size(); ++i) {
                for (std::size_t j = i + 1; j < res.methods.size(); ++j) {
                    const Vec xa = detail::interp_x(res.methods[i].representative, t);
                    const Vec xb = detail::interp_x(res.methods[j].representative, t);
                    double sq = 0.0;
                    for (std::size_t k = 0; k < xa.size(); ++k) {
                        const double dk = xa[k] - xb[k];
                        sq += dk * dk;
                    }
                    out << ',' << detail::fmt_g17(std::sqrt(sq));
                }
            }
            out << '\n';
        }
        files.push_back("plots/distance.csv");
    }

    {
        std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
        out << report_json(res).dump(2) << '\n';
        files.push_back("report.json");
    }
    return files;
}

// ----------------------------------------------------------------- plan/dry

inline std::string plan_text(const ExperimentConfig& cfg) {
    Dataset ds = materialize_dataset(cfg);
    const auto model = build_model(cfg.model, ds);
    std::ostringstream out;
    out << "plan:\n";
    out << "  model: " << model->architecture() << " (N=" << ds.size()
        << ", m=" << ds.feature_dim() << ", d=" << model->dim() << ")\n";
    if (cfg.model.synthetic) {
        out << "  dataset: synthetic " << cfg.model.synthetic->kind
            << " (regenerated from seed " << cfg.seed << ")\n";
    } else {
        out << "  dataset: " << cfg.model.dataset_path << "\n";
    }
    for (const auto& m : cfg.methods) {
        out << "  method " << m.name << ": eta=" << m.eta << " steps=" << m.steps;
        if (m.name == "sgd") {
            out << " batch=" << m.batch_size << " seeds=[";
            for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
                out << (i ? "," : "") << cfg.seeds[i];
            }
            out << "]";
        }
        out << "\n";
    }
    out << "  output_dir: " << cfg.output_dir << "\n";
    std::size_t n_tasks = 0;
    for (const auto& m : cfg.methods) n_tasks += m.name == "sgd" ? cfg.seeds.size() : 1;
    out << "  tasks: " << n_tasks << "\n";
    return out.str();
}

/// Point diagnostics for the `diagnose` subcommand, including D itself.
inline ojson diagnose_json(const ExperimentConfig& cfg, const Vec& x) {
    Dataset ds = materialize_dataset(cfg);
    const auto model = build_model(cfg.model, ds);
    if (x.size() != model->dim()) {
        throw ConfigError("diagnose: point has " + std::to_string(x.size()) +
                          " entries, model dimension is " + std::to_string(model->dim()));
    }
    require_finite(x, "diagnose point");
    DiffusionOptions dop;
    dop.form = cfg.form;
    dop.pairwise_cap = cfg.pairwise_cap;
    const Matrix d = diffusion_matrix(*model, x, dop);
    ojson out;
    out["x"] = x;
    ojson rows = ojson::array();
    for (std::size_t r = 0; r < d.rows(); ++r) {
        ojson row = ojson::array();
        for (std::size_t c = 0; c < d.cols(); ++c) row.push_back(d(r, c));
        rows.push_back(std::move(row));
    }
    out["D"] = std::move(rows);
    for (const auto& [key, val] : point_diagnostics(*model, x, cfg)) out[key] = val;
    return out;
}

}  // namespace diffmetric
