#pragma once

// The four dynamics under one trajectory-recording contract:
//   gd        x' = x - eta * grad_B f,  B = full dataset (explicit Euler)
//   sgd       x' = x - eta * grad_B f,  B sampled per step
//   rgd       dx/dt = -(g^-1) grad f, RK4
//   geodesic  d2x/dt2 = -Gamma(v,v) - H_f v, RK4 on (x, v)
// gd and sgd share one update kernel: the batch scale q = s/|B| is formed
// first and batch sums run in ascending index order, so |B| = N reproduces
// gd bit for bit. rgd and the plain gradient flow share the RK4 kernel and
// the same gradient evaluation, so D = 0 keeps them bitwise identical.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diffmetric/common.hpp"
#include "diffmetric/diffusion.hpp"
#include "diffmetric/geometry.hpp"
#include "diffmetric/linalg.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/rng.hpp"

namespace diffmetric {

enum class LossConvention { Sum, Mean };

inline double convention_scale(LossConvention conv, std::size_t n) {
    return conv == LossConvention::Sum ? 1.0 : 1.0 / static_cast<double>(n);
}

struct EpsilonPolicy {
    double c = 0.1;
    double floor = 1e-3;
    bool frozen = false;
};

struct TrajectoryRecord {
    std::size_t step = 0;
    double t = 0.0;
    Vec x;
    std::optional<Vec> v;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::map<std::string, double> diag;
};

struct Trajectory {
    std::string method;
    std::vector<TrajectoryRecord> records;
};

struct RunOptions {
    double eta = 0.01;
    std::size_t steps = 100;
    std::size_t cadence = 1;
    LossConvention convention = LossConvention::Sum;
    EpsilonPolicy eps;
    DiffusionOptions diffusion;
    InverseMode inverse = InverseMode::WeakField;
    ChristoffelMode christoffel = ChristoffelMode::WeakField;
    double christoffel_fd_step = 1e-5;
    bool diagnostics = true;

    std::size_t batch = 1;        // sgd
    std::uint64_t seed = 0;       // sgd
    bool epoch_shuffle = false;   // sgd

    enum class V0Policy { MetricGradient, Zero, Custom };
    V0Policy v0_policy = V0Policy::MetricGradient;  // geodesic
    Vec v0_custom;                                  // geodesic
};

namespace detail {

inline void validate_run(const RunOptions& opt) {
    if (!(opt.eta > 0.0)) throw ConfigError("dynamics: eta must be positive");
    if (opt.steps < 1) throw ConfigError("dynamics: steps must be >= 1");
}

inline bool on_cadence(std::size_t step, std::size_t cadence, std::size_t total) {
    if (step == 0 || step == total) return true;
    return cadence > 0 && step % cadence == 0;
}

inline Vec scaled_total_grad(const LossModel& model, const Vec& x, double scale) {
    Vec g = model.total_grad(x);
    if (scale != 1.0) {
        for (double& v : g) v *= scale;
    }
    return g;
}

/// Frozen policies resolve epsilon once at x0 and carry it here.
inline double epsilon_for(const Matrix& d, const EpsilonPolicy& pol,
                          const std::optional<double>& frozen_eps) {
    if (frozen_eps) return *frozen_eps;
    const double lam = std::max(max_eigenvalue(d), 0.0);
    return select_epsilon(lam, pol.c, pol.floor);
}

inline std::map<std::string, double> diag_at(const LossModel& model, const Vec& x, double scale,
                                             const RunOptions& opt,
                                             const std::optional<double>& frozen_eps) {
    const Matrix d = diffusion_matrix(model, x, opt.diffusion);
    const double lam = std::max(max_eigenvalue(d), 0.0);
    const double eps = frozen_eps ? *frozen_eps
                                  : select_epsilon(lam, opt.eps.c, opt.eps.floor);
    const DiffusionMetric metric(d, eps);
    const double j = j_residual(metric, scaled_total_grad(model, x, scale), InverseMode::WeakField);
    return {
        {"lambda_max", lam},
        {"epsilon", eps},
        {"rank_D", static_cast<double>(numerical_rank(d))},
        {"j_residual", j},
    };
}

inline void append_record(Trajectory& traj, const LossModel& model, const RunOptions& opt,
                          const std::optional<double>& frozen_eps, std::size_t step, double scale,
                          const Vec& x, const std::optional<Vec>& v) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.t = static_cast<double>(step) * opt.eta;
    rec.x = x;
    rec.v = v;
    rec.loss = scale * model.total_value(x);
    rec.grad_norm = norm2(scaled_total_grad(model, x, scale));
    if (opt.diagnostics) rec.diag = diag_at(model, x, scale, opt, frozen_eps);
    traj.records.push_back(std::move(rec));
}

/// One Euler step of the minibatch update; idx must be ascending.
inline void batch_step(const LossModel& model, Vec& x, const std::vector<std::size_t>& idx,
                       double eta_q) {
    Vec sum(x.size(), 0.0);
    for (std::size_t i : idx) {
        const Vec g = model.per_sample_grad(i, x);
        for (std::size_t k = 0; k < x.size(); ++k) sum[k] += g[k];
    }
    require_finite(sum, "batch gradient");
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= eta_q * sum[k];
}

inline std::optional<double> resolve_frozen_eps(const LossModel& model, const Vec& x0,
                                                const RunOptions& opt) {
    if (!opt.eps.frozen) return std::nullopt;
    const Matrix d0 = diffusion_matrix(model, x0, opt.diffusion);
    const double lam = std::max(max_eigenvalue(d0), 0.0);
    return select_epsilon(lam, opt.eps.c, opt.eps.floor);
}

template <typename Deriv>
inline Vec rk4_step(Deriv&& deriv, double t, const Vec& y, double h) {
    const Vec k1 = deriv(t, y);
    Vec tmp = y;
    axpy(h / 2.0, k1, tmp);
    const Vec k2 = deriv(t + h / 2.0, tmp);
    tmp = y;
    axpy(h / 2.0, k2, tmp);
    const Vec k3 = deriv(t + h / 2.0, tmp);
    tmp = y;
    axpy(h, k3, tmp);
    const Vec k4 = deriv(t + h, tmp);
    Vec out = y;
    const double w = h / 6.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

template <typename Deriv>
inline Trajectory run_flow(const LossModel& model, Vec x, const RunOptions& opt,
                           const std::optional<double>& frozen_eps, const char* method,
                           Deriv&& deriv) {
    Trajectory traj;
    traj.method = method;
    const double scale = convention_scale(opt.convention, model.num_samples());
    append_record(traj, model, opt, frozen_eps, 0, scale, x, std::nullopt);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        x = rk4_step(deriv, static_cast<double>(step - 1) * opt.eta, x, opt.eta);
        require_finite(x, method);
        if (on_cadence(step, opt.cadence, opt.steps)) {
            append_record(traj, model, opt, frozen_eps, step, scale, x, std::nullopt);
        }
    }
    return traj;
}

}  // namespace detail

inline Vec step_gd(const LossModel& model, const Vec& x, double eta,
                   LossConvention conv = LossConvention::Sum) {
    if (!(eta > 0.0)) throw ConfigError("step_gd: eta must be positive");
    const std::size_t n = model.num_samples();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const double q = (conv == LossConvention::Sum ? static_cast<double>(n) : 1.0) /
                     static_cast<double>(n);
    Vec out = x;
    detail::batch_step(model, out, all, eta * q);
    return out;
}

inline Trajectory run_gd(const LossModel& model, Vec x, const RunOptions& opt) {
    detail::validate_run(opt);
    const std::size_t n = model.num_samples();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const double s = opt.convention == LossConvention::Sum ? static_cast<double>(n) : 1.0;
    const double eta_q = opt.eta * (s / static_cast<double>(n));
    const double scale = convention_scale(opt.convention, n);
    const auto frozen = detail::resolve_frozen_eps(model, x, opt);

    Trajectory traj;
    traj.method = "gd";
    detail::append_record(traj, model, opt, frozen, 0, scale, x, std::nullopt);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        detail::batch_step(model, x, all, eta_q);
        if (detail::on_cadence(step, opt.cadence, opt.steps)) {
            detail::append_record(traj, model, opt, frozen, step, scale, x, std::nullopt);
        }
    }
    return traj;
}

inline Trajectory run_sgd(const LossModel& model, Vec x, const RunOptions& opt) {
    detail::validate_run(opt);
    const std::size_t n = model.num_samples();
    if (opt.batch < 1 || opt.batch > n) throw ConfigError("sgd: batch size must be in [1, N]");
    const double s = opt.convention == LossConvention::Sum ? static_cast<double>(n) : 1.0;
    const double eta_q = opt.eta * (s / static_cast<double>(opt.batch));
    const double scale = convention_scale(opt.convention, n);
    const auto frozen = detail::resolve_frozen_eps(model, x, opt);

    Rng rng(opt.seed);
    std::vector<std::size_t> perm;   // epoch mode
    std::size_t pos = 0;

    Trajectory traj;
    traj.method = "sgd";
    detail::append_record(traj, model, opt, frozen, 0, scale, x, std::nullopt);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        std::vector<std::size_t> idx;
        if (opt.epoch_shuffle) {
            if (pos + opt.batch > perm.size()) {
                perm.resize(n);
                for (std::size_t i = 0; i < n; ++i) perm[i] = i;
                rng.shuffle(perm);
                pos = 0;
            }
            idx.assign(perm.begin() + pos, perm.begin() + pos + opt.batch);
            pos += opt.batch;
            std::sort(idx.begin(), idx.end());
        } else {
            idx = rng.sample_without_replacement(n, opt.batch);
        }
        detail::batch_step(model, x, idx, eta_q);
        if (detail::on_cadence(step, opt.cadence, opt.steps)) {
            detail::append_record(traj, model, opt, frozen, step, scale, x, std::nullopt);
        }
    }
    return traj;
}

/// RK4 on dx/dt = -grad f; the D = 0 reference for the rgd flow.
inline Trajectory run_gd_flow(const LossModel& model, Vec x, const RunOptions& opt) {
    detail::validate_run(opt);
    const double scale = convention_scale(opt.convention, model.num_samples());
    const auto frozen = detail::resolve_frozen_eps(model, x, opt);
    const auto deriv = [&](double, const Vec& p) {
        Vec g = detail::scaled_total_grad(model, p, scale);
        for (double& v : g) v = -v;
        return g;
    };
    return detail::run_flow(model, std::move(x), opt, frozen, "gd_flow", deriv);
}

inline Trajectory run_rgd_flow(const LossModel& model, Vec x, const RunOptions& opt) {
    detail::validate_run(opt);
    const double scale = convention_scale(opt.convention, model.num_samples());
    const auto frozen = detail::resolve_frozen_eps(model, x, opt);
    const auto deriv = [&](double, const Vec& p) {
        const Matrix d = diffusion_matrix(model, p, opt.diffusion);
        const DiffusionMetric metric(d, detail::epsilon_for(d, opt.eps, frozen));
        Vec g = metric_gradient(metric, detail::scaled_total_grad(model, p, scale), opt.inverse);
        for (double& v : g) v = -v;
        return g;
    };
    return detail::run_flow(model, std::move(x), opt, frozen, "rgd", deriv);
}

inline Trajectory run_geodesic(const LossModel& model, Vec x0, const RunOptions& opt) {
    detail::validate_run(opt);
    const std::size_t d = model.dim();
    const double scale = convention_scale(opt.convention, model.num_samples());
    const auto frozen = detail::resolve_frozen_eps(model, x0, opt);

    Vec v0(d, 0.0);
    switch (opt.v0_policy) {
        case RunOptions::V0Policy::Zero:
            break;
        case RunOptions::V0Policy::Custom:
            if (opt.v0_custom.size() != d) throw ConfigError("geodesic: v0 dimension mismatch");
            v0 = opt.v0_custom;
            break;
        case RunOptions::V0Policy::MetricGradient: {
            const Matrix d0 = diffusion_matrix(model, x0, opt.diffusion);
            const DiffusionMetric metric(d0, detail::epsilon_for(d0, opt.eps, frozen));
            v0 = metric_gradient(metric, detail::scaled_total_grad(model, x0, scale), opt.inverse);
            for (double& v : v0) v = -v;
            break;
        }
    }

    const auto deriv = [&](double, const Vec& y) {
        const Vec xs(y.begin(), y.begin() + d);
        const Vec vs(y.begin() + d, y.end());
        const Matrix dm = diffusion_matrix(model, xs, opt.diffusion);
        const double eps = detail::epsilon_for(dm, opt.eps, frozen);
        const ChristoffelField gamma =
            opt.christoffel == ChristoffelMode::WeakField
                ? christoffel_weak_field(model, xs, eps)
                : christoffel_levi_civita_fd(model, xs, eps, opt.christoffel_fd_step,
                                             opt.diffusion);
        Matrix hess = model.total_hessian(xs);
        if (scale != 1.0) {
            for (double& v : hess.data()) v *= scale;
        }
        const Vec accel = geodesic_accel(gamma, hess, vs);
        Vec out(2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            out[i] = vs[i];
            out[d + i] = accel[i];
        }
        return out;
    };

    Vec y(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        y[i] = x0[i];
        y[d + i] = v0[i];
    }

    Trajectory traj;
    traj.method = "geodesic";
    const auto record = [&](std::size_t step) {
        const Vec xs(y.begin(), y.begin() + d);
        Vec vs(y.begin() + d, y.end());
        detail::append_record(traj, model, opt, frozen, step, scale, xs, std::move(vs));
    };
    record(0);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        y = detail::rk4_step(deriv, static_cast<double>(step - 1) * opt.eta, y, opt.eta);
        require_finite(y, "geodesic");
        if (detail::on_cadence(step, opt.cadence, opt.steps)) record(step);
    }
    return traj;
}

}  // namespace diffmetric
