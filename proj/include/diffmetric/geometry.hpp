#pragma once

// Geometry of the diffusion metric g = I + eps*D:
//   - Christoffel symbols, two ways: the closed weak-field form
//       Gamma^k_ij = (eps/N^2) sum_a (d_i d_j fhat_a)(d_k fhat_a)
//     and a finite-difference Levi-Civita evaluation contracted with the
//     exact inverse metric, used as an independent oracle.
//   - metric gradient (I - eps*D) grad f, or the exact-inverse variant.
//   - geodesic acceleration with the loss-gradient force term.
//   - diagnostics: third-derivative residual, divergence of D-tilde,
//     stationarity residual j.

#include <map>
#include <utility>
#include <vector>

#include "diffmetric/common.hpp"
#include "diffmetric/diffusion.hpp"
#include "diffmetric/linalg.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/rng.hpp"

namespace diffmetric {

enum class ChristoffelMode { WeakField, ExactFd };

class ChristoffelField {
public:
    ChristoffelField(std::size_t d, ChristoffelMode mode)
        : d_(d), mode_(mode), gamma_(d * d * d, 0.0) {}

    std::size_t dim() const { return d_; }
    ChristoffelMode mode() const { return mode_; }

    double& at(std::size_t k, std::size_t i, std::size_t j) {
        return gamma_[(k * d_ + i) * d_ + j];
    }
    double at(std::size_t k, std::size_t i, std::size_t j) const {
        return gamma_[(k * d_ + i) * d_ + j];
    }

    const std::vector<double>& data() const { return gamma_; }
    std::vector<double>& data() { return gamma_; }

    double max_abs() const {
        double m = 0.0;
        for (double v : gamma_) m = std::max(m, std::fabs(v));
        return m;
    }

    /// max |Gamma^k_ij - Gamma^k_ji| over all indices
    double lower_asymmetry() const {
        double m = 0.0;
        for (std::size_t k = 0; k < d_; ++k)
            for (std::size_t i = 0; i < d_; ++i)
                for (std::size_t j = i + 1; j < d_; ++j)
                    m = std::max(m, std::fabs(at(k, i, j) - at(k, j, i)));
        return m;
    }

private:
    std::size_t d_;
    ChristoffelMode mode_;
    std::vector<double> gamma_;
};

inline double max_abs_diff(const ChristoffelField& a, const ChristoffelField& b) {
    if (a.dim() != b.dim()) throw NumericError("christoffel diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

inline ChristoffelField christoffel_weak_field(const LossModel& model, const Vec& x,
                                               double eps) {
    const std::size_t n = model.num_samples();
    if (n < 2) throw ConfigError("christoffel: N >= 2 required");
    const std::size_t d = model.dim();

    std::vector<Vec> grads(n);
    std::vector<Matrix> hess(n);
    for (std::size_t i = 0; i < n; ++i) {
        grads[i] = model.per_sample_grad(i, x);
        hess[i] = model.per_sample_hessian(i, x);
    }

    ChristoffelField out(d, ChristoffelMode::WeakField);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            for (std::size_t k = 0; k < d; ++k) {
                const double jk = grads[a][k] - grads[b][k];
                if (jk == 0.0) continue;
                for (std::size_t i = 0; i < d; ++i) {
                    const double* ha = hess[a].row(i);
                    const double* hb = hess[b].row(i);
                    for (std::size_t j = 0; j < d; ++j) {
                        out.at(k, i, j) += (ha[j] - hb[j]) * jk;
                    }
                }
            }
        }
    }
    const double scale = eps / (static_cast<double>(n) * static_cast<double>(n));
    for (double& v : out.data()) v *= scale;
    return out;
}

/// Gamma^w_uv = (1/2) g^{wz} (d_u g_vz - d_z g_uv + d_v g_uz), with the
/// metric differentiated by central differences at frozen eps and the
/// inverse taken exactly.
inline ChristoffelField christoffel_levi_civita_fd(const LossModel& model, const Vec& x,
                                                   double eps, double step = 1e-5,
                                                   const DiffusionOptions& opt = {}) {
    if (!(step > 0.0)) throw NumericError("christoffel fd: step must be positive");
    const std::size_t d = model.dim();

    const auto metric_of = [&](const Vec& p) {
        Matrix g = diffusion_matrix(model, p, opt);
        for (double& v : g.data()) v *= eps;
        for (std::size_t i = 0; i < d; ++i) g(i, i) += 1.0;
        return g;
    };

    std::vector<Matrix> dg(d);
    Vec xp = x;
    for (std::size_t u = 0; u < d; ++u) {
        const double saved = xp[u];
        xp[u] = saved + step;
        Matrix gp = metric_of(xp);
        xp[u] = saved - step;
        const Matrix gm = metric_of(xp);
        xp[u] = saved;
        const double inv = 1.0 / (2.0 * step);
        for (std::size_t i = 0; i < gp.data().size(); ++i) {
            gp.data()[i] = (gp.data()[i] - gm.data()[i]) * inv;
        }
        dg[u] = std::move(gp);
    }

    const Matrix ginv = gauss_inverse(metric_of(x));
    ChristoffelField out(d, ChristoffelMode::ExactFd);
    for (std::size_t w = 0; w < d; ++w) {
        for (std::size_t u = 0; u < d; ++u) {
            for (std::size_t v = 0; v < d; ++v) {
                double s = 0.0;
                for (std::size_t z = 0; z < d; ++z) {
                    s += ginv(w, z) * (dg[u](v, z) - dg[z](u, v) + dg[v](u, z));
                }
                out.at(w, u, v) = 0.5 * s;
            }
        }
    }
    return out;
}

/// grad f lowered through the inverse metric. D = 0 returns the input
/// unchanged so Euclidean callers keep bit-identical values.
inline Vec metric_gradient(const DiffusionMetric& metric, const Vec& grad_f,
                           InverseMode mode) {
    if (grad_f.size() != metric.dim()) throw NumericError("metric_gradient: dimension mismatch");
    if (metric.is_euclidean()) return grad_f;
    return matvec(metric.inverse(mode), grad_f);
}

struct GeodesicState {
    Vec x;
    Vec v;
    double t = 0.0;
};

/// accel^k = -Gamma^k_ij v^i v^j - (H_f v)_k
inline Vec geodesic_accel(const ChristoffelField& gamma, const Matrix& hess_f, const Vec& v) {
    const std::size_t d = v.size();
    if (gamma.dim() != d || hess_f.rows() != d) {
        throw NumericError("geodesic_accel: dimension mismatch");
    }
    Vec accel(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        double q = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double vi = v[i];
            if (vi == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) q += gamma.at(k, i, j) * vi * v[j];
        }
        double f = 0.0;
        const double* hrow = hess_f.row(k);
        for (std::size_t l = 0; l < d; ++l) f += hrow[l] * v[l];
        accel[k] = -q - f;
    }
    return accel;
}

inline Vec geodesic_accel(const LossModel& model, const GeodesicState& state, double eps,
                          ChristoffelMode mode, double loss_scale = 1.0,
                          double fd_step = 1e-5) {
    const ChristoffelField gamma = mode == ChristoffelMode::WeakField
                                       ? christoffel_weak_field(model, state.x, eps)
                                       : christoffel_levi_civita_fd(model, state.x, eps, fd_step);
    Matrix hess = model.total_hessian(state.x);
    if (loss_scale != 1.0) {
        for (double& v : hess.data()) v *= loss_scale;
    }
    return geodesic_accel(gamma, hess, state.v);
}

/// max |d_i d_j d_k fhat_a| over a seeded sample of indices, estimated by
/// central differences of per-sample Hessian differences.
inline double third_derivative_residual(const LossModel& model, const Vec& x,
                                        double step = 1e-4, std::uint64_t seed = 12345,
                                        std::size_t max_triples = 64,
                                        std::size_t max_pairs = 32) {
    if (!(step > 0.0)) throw NumericError("third_derivative_residual: step must be positive");
    const std::size_t n = model.num_samples();
    if (n < 2) return 0.0;
    const std::size_t d = model.dim();

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);

    Rng rng(derive_seed(seed, 0x7d3u));
    if (pairs.size() > max_pairs) {
        std::vector<std::pair<std::size_t, std::size_t>> picked;
        for (std::size_t t = 0; t < max_pairs; ++t) picked.push_back(pairs[rng.below(pairs.size())]);
        pairs = std::move(picked);
    }

    // triples grouped by the differentiated coordinate k
    std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> by_k;
    if (d * d * d <= max_triples) {
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) by_k[k].emplace_back(i, j);
    } else {
        for (std::size_t t = 0; t < max_triples; ++t) {
            by_k[rng.below(d)].emplace_back(rng.below(d), rng.below(d));
        }
    }

    std::vector<std::size_t> samples;
    for (const auto& [a, b] : pairs) {
        samples.push_back(a);
        samples.push_back(b);
    }
    std::sort(samples.begin(), samples.end());
    samples.erase(std::unique(samples.begin(), samples.end()), samples.end());

    double best = 0.0;
    Vec xp = x;
    for (const auto& [k, entries] : by_k) {
        const double h = step * (1.0 + std::fabs(x[k]));
        std::map<std::size_t, Matrix> hp, hm;
        const double saved = xp[k];
        xp[k] = saved + h;
        for (std::size_t s : samples) hp.emplace(s, model.per_sample_hessian(s, xp));
        xp[k] = saved - h;
        for (std::size_t s : samples) hm.emplace(s, model.per_sample_hessian(s, xp));
        xp[k] = saved;
        const double inv = 1.0 / (2.0 * h);
        for (const auto& [a, b] : pairs) {
            const Matrix& hap = hp.at(a);
            const Matrix& hbp = hp.at(b);
            const Matrix& ham = hm.at(a);
            const Matrix& hbm = hm.at(b);
            for (const auto& [i, j] : entries) {
                const double val = ((hap(i, j) - hbp(i, j)) - (ham(i, j) - hbm(i, j))) * inv;
                best = std::max(best, std::fabs(val));
            }
        }
    }
    return best;
}

/// (div Dtilde)_r = eps * sum_s d_s D_rs, central differences with
/// per-coordinate steps step*(1+|x_s|).
inline Vec divergence_Dtilde(const LossModel& model, const Vec& x, double eps,
                             double step = 1e-4, const DiffusionOptions& opt = {}) {
    if (!(step > 0.0)) throw NumericError("divergence_Dtilde: step must be positive");
    const std::size_t d = model.dim();
    Vec out(d, 0.0);
    Vec xp = x;
    for (std::size_t s = 0; s < d; ++s) {
        const double h = step * (1.0 + std::fabs(x[s]));
        const double saved = xp[s];
        xp[s] = saved + h;
        const Matrix dp = diffusion_matrix(model, xp, opt);
        xp[s] = saved - h;
        const Matrix dm = diffusion_matrix(model, xp, opt);
        xp[s] = saved;
        const double inv = 1.0 / (2.0 * h);
        for (std::size_t r = 0; r < d; ++r) out[r] += (dp(r, s) - dm(r, s)) * inv;
    }
    for (double& v : out) v *= eps;
    return out;
}

/// Stationarity residual || -grad f + (I + eps D) nabla_D f ||_inf, evaluated
/// literally; algebraically equal to ||eps^2 D^2 grad f||_inf in weak-field
/// mode and to roundoff in exact mode.
inline double j_residual(const DiffusionMetric& metric, const Vec& grad_f, InverseMode mode) {
    const Vec w = metric_gradient(metric, grad_f, mode);
    const Vec gw = matvec(metric.metric(), w);
    double m = 0.0;
    for (std::size_t i = 0; i < grad_f.size(); ++i) {
        m = std::max(m, std::fabs(gw[i] - grad_f[i]));
    }
    return m;
}

inline double j_residual(const LossModel& model, const Vec& x, double eps, InverseMode mode,
                         double loss_scale = 1.0, const DiffusionOptions& opt = {}) {
    const DiffusionMetric metric(diffusion_matrix(model, x, opt), eps);
    Vec grad = model.total_grad(x);
    if (loss_scale != 1.0) {
        for (double& v : grad) v *= loss_scale;
    }
    return j_residual(metric, grad, mode);
}

}  // namespace diffmetric
