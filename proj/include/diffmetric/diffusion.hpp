#pragma once

// The diffusion matrix D(x) of per-sample gradient noise, built two ways:
//   variance form   D = (1/N) sum_k g_k g_k^T - m m^T,   m = (1/N) sum_k g_k
//   pairwise form   D = (1/N^2) J^T J, J rows = g_i - g_j over pairs i < j
// plus spectrum helpers and the metric g = I + eps*D with its inverses.
// The pairwise form is canonical: it yields exact zeros for identical
// gradients, which the degenerate-case guarantees downstream rely on.

#include <cstddef>
#include <utility>

#include "diffmetric/common.hpp"
#include "diffmetric/linalg.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/rng.hpp"

namespace diffmetric {

enum class DiffusionForm { Pairwise, Variance };
enum class InverseMode { WeakField, Exact };

/// Rows ordered (0,1),(0,2),...,(N-2,N-1); row for (i,j) is g_i - g_j.
inline Matrix build_pairwise_jacobian(const LossModel& model, const Vec& x) {
    const std::size_t n = model.num_samples();
    if (n < 2) throw ConfigError("pairwise jacobian: N >= 2 required");
    const std::size_t d = model.dim();

    std::vector<Vec> grads;
    grads.reserve(n);
    for (std::size_t i = 0; i < n; ++i) grads.push_back(model.per_sample_grad(i, x));

    Matrix j(n * (n - 1) / 2, d);
    std::size_t row = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            double* out = j.row(row++);
            for (std::size_t c = 0; c < d; ++c) out[c] = grads[i][c] - grads[k][c];
        }
    }
    return j;
}

inline Matrix diffusion_variance_form(const LossModel& model, const Vec& x) {
    const std::size_t n = model.num_samples();
    const std::size_t d = model.dim();
    Matrix second(d, d);
    Vec mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec g = model.per_sample_grad(i, x);
        for (std::size_t r = 0; r < d; ++r) {
            mean[r] += g[r];
            double* row = second.row(r);
            const double gr = g[r];
            for (std::size_t c = 0; c < d; ++c) row[c] += gr * g[c];
        }
    }
    const double dn = static_cast<double>(n);
    Matrix out(d, d);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            out(r, c) = second(r, c) / dn - (mean[r] / dn) * (mean[c] / dn);
        }
    }
    return out;
}

inline Matrix diffusion_pairwise_form(const Matrix& j, std::size_t n) {
    if (n < 2 || j.rows() != n * (n - 1) / 2) {
        throw ConfigError("pairwise form: jacobian rows do not match N(N-1)/2");
    }
    const std::size_t d = j.cols();
    Matrix out(d, d);
    for (std::size_t a = 0; a < j.rows(); ++a) {
        const double* row = j.row(a);
        for (std::size_t r = 0; r < d; ++r) {
            const double jr = row[r];
            if (jr == 0.0) continue;
            double* orow = out.row(r);
            for (std::size_t c = 0; c < d; ++c) orow[c] += jr * row[c];
        }
    }
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    for (double& v : out.data()) v /= n2;
    return out;
}

struct DiffusionOptions {
    DiffusionForm form = DiffusionForm::Pairwise;
    std::size_t pairwise_cap = 512;
};

inline Matrix diffusion_matrix(const LossModel& model, const Vec& x,
                               const DiffusionOptions& opt = {}) {
    const std::size_t n = model.num_samples();
    if (n == 1) return Matrix(model.dim(), model.dim());
    if (opt.form == DiffusionForm::Variance) return diffusion_variance_form(model, x);
    if (n > opt.pairwise_cap) {
        throw ConfigError("pairwise form: N = " + std::to_string(n) + " exceeds cap " +
                          std::to_string(opt.pairwise_cap));
    }
    return diffusion_pairwise_form(build_pairwise_jacobian(model, x), n);
}

/// Largest eigenvalue of a symmetric matrix. Power iteration on the
/// Gershgorin-shifted matrix so the target is dominant in magnitude.
inline double max_eigenvalue(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw NumericError("max_eigenvalue: square matrix required");
    if (!all_finite(a.data())) throw NumericError("max_eigenvalue: non-finite entries");
    if (n == 0) return 0.0;

    double shift = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += std::fabs(a(r, c));
        shift = std::max(shift, s);
    }
    if (shift == 0.0) return 0.0;

    Vec v(n);
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 0.5 + static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-54;
    }
    double inv = 1.0 / norm2(v);
    for (double& vi : v) vi *= inv;

    double prev = 0.0;
    for (int iter = 0; iter < 100000; ++iter) {
        Vec w = matvec(a, v);
        axpy(shift, v, w);
        const double lambda = dot(v, w);  // Rayleigh quotient of the shifted matrix
        const double wn = norm2(w);
        if (wn == 0.0) return -shift;  // a = -shift*I exactly
        inv = 1.0 / wn;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] * inv;
        if (iter > 0 && std::fabs(lambda - prev) <= 1e-12 * std::max(1.0, std::fabs(lambda))) {
            return lambda - shift;
        }
        prev = lambda;
    }
    return prev - shift;
}

/// Eigenvalues with magnitude above rel_tol * max|eig| count toward the rank.
inline std::size_t numerical_rank(const Matrix& a, double rel_tol = 1e-8) {
    const Vec eigs = jacobi_eigenvalues(a);
    double scale = 0.0;
    for (double e : eigs) scale = std::max(scale, std::fabs(e));
    if (scale == 0.0) return 0;
    std::size_t rank = 0;
    for (double e : eigs) {
        if (std::fabs(e) > rel_tol * scale) ++rank;
    }
    return rank;
}

inline double select_epsilon(double lambda_max, double safety_c, double floor_eps = 1e-3) {
    if (!(safety_c > 0.0 && safety_c < 1.0)) {
        throw ConfigError("epsilon safety factor must lie in (0,1)");
    }
    if (!(floor_eps > 0.0)) throw ConfigError("epsilon floor must be positive");
    if (!(lambda_max >= 0.0)) throw NumericError("select_epsilon: lambda_max must be >= 0");
    return lambda_max > 0.0 ? safety_c / lambda_max : floor_eps;
}

/// g = I + eps*D with eps validated against 1/lambda_max(D).
class DiffusionMetric {
public:
    DiffusionMetric(Matrix d, double epsilon) : d_(std::move(d)), epsilon_(epsilon) {
        if (d_.rows() != d_.cols()) throw NumericError("metric: D must be square");
        if (!(epsilon_ > 0.0)) throw ConfigError("metric: epsilon must be positive");
        lambda_max_ = max_eigenvalue(d_);
        // strict bound, with slack for the iterative eigenvalue estimate
        if (lambda_max_ > 0.0 && epsilon_ * lambda_max_ >= 1.0 - 1e-9) {
            throw NumericError("metric: epsilon >= 1/lambda_max, g may be singular");
        }
    }

    const Matrix& diffusion() const { return d_; }
    double epsilon() const { return epsilon_; }
    double lambda_max() const { return lambda_max_; }
    std::size_t dim() const { return d_.rows(); }

    /// True when eps*D contributes nothing; callers take identity fast paths.
    bool is_euclidean() const { return epsilon_ * max_abs(d_) == 0.0; }

    Matrix metric() const {
        Matrix g = d_;
        for (double& v : g.data()) v *= epsilon_;
        for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += 1.0;
        return g;
    }

    Matrix inverse(InverseMode mode) const {
        if (mode == InverseMode::WeakField) {
            Matrix inv = d_;
            for (double& v : inv.data()) v *= -epsilon_;
            for (std::size_t i = 0; i < inv.rows(); ++i) inv(i, i) += 1.0;
            return inv;
        }
        return gauss_inverse(metric());
    }

private:
    Matrix d_;
    double epsilon_ = 0.0;
    double lambda_max_ = 0.0;
};

inline DiffusionMetric metric_at(Matrix d, double epsilon) {
    return DiffusionMetric(std::move(d), epsilon);
}

}  // namespace diffmetric
