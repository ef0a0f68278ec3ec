#pragma once

// Loss models over a fixed dataset. Each model exposes per-sample losses
//   f_i : R^d -> R,  i = 0..N-1
// together with analytic gradients and Hessians. The master objective is
// f = sum_i f_i; callers that want the mean convention scale by 1/N.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "diffmetric/common.hpp"
#include "diffmetric/dataset.hpp"
#include "diffmetric/linalg.hpp"

namespace diffmetric {

class LossModel {
public:
    virtual ~LossModel() = default;

    virtual std::size_t num_samples() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string architecture() const = 0;

    virtual double per_sample_value(std::size_t i, const Vec& x) const = 0;
    virtual Vec per_sample_grad(std::size_t i, const Vec& x) const = 0;
    virtual Matrix per_sample_hessian(std::size_t i, const Vec& x) const = 0;

    double total_value(const Vec& x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < num_samples(); ++i) s += per_sample_value(i, x);
        return s;
    }

    Vec total_grad(const Vec& x) const {
        Vec g(dim(), 0.0);
        for (std::size_t i = 0; i < num_samples(); ++i) {
            const Vec gi = per_sample_grad(i, x);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
        }
        return g;
    }

    Matrix total_hessian(const Vec& x) const {
        Matrix h(dim(), dim());
        for (std::size_t i = 0; i < num_samples(); ++i) {
            const Matrix hi = per_sample_hessian(i, x);
            for (std::size_t k = 0; k < h.data().size(); ++k) h.data()[k] += hi.data()[k];
        }
        return h;
    }
};

/// f_i(x) = a_i * ||x - c_i||^2. The dataset encodes c_i as the feature
/// vector and a_i as the target, so d equals the feature dimension.
class QuadraticModel final : public LossModel {
public:
    explicit QuadraticModel(Dataset ds) : ds_(std::move(ds)) {}

    std::size_t num_samples() const override { return ds_.size(); }
    std::size_t dim() const override { return ds_.feature_dim(); }
    std::string architecture() const override { return "quadratic"; }

    double per_sample_value(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "quadratic x");
        const double* c = ds_.feature(i);
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double r = x[k] - c[k];
            s += r * r;
        }
        return ds_.target(i) * s;
    }

    Vec per_sample_grad(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "quadratic x");
        const double* c = ds_.feature(i);
        const double a2 = 2.0 * ds_.target(i);
        Vec g(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) g[k] = a2 * (x[k] - c[k]);
        return g;
    }

    Matrix per_sample_hessian(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "quadratic x");
        Matrix h(dim(), dim());
        const double a2 = 2.0 * ds_.target(i);
        for (std::size_t k = 0; k < dim(); ++k) h(k, k) = a2;
        return h;
    }

private:
    Dataset ds_;
};

/// f_i(x) = (<v_i, x> - y_i)^2 with v_i the feature vector of sample i.
class LinearRegressionModel final : public LossModel {
public:
    explicit LinearRegressionModel(Dataset ds) : ds_(std::move(ds)) {}

    std::size_t num_samples() const override { return ds_.size(); }
    std::size_t dim() const override { return ds_.feature_dim(); }
    std::string architecture() const override { return "linear_regression"; }

    double per_sample_value(std::size_t i, const Vec& x) const override {
        const double r = residual(i, x);
        return r * r;
    }

    Vec per_sample_grad(std::size_t i, const Vec& x) const override {
        const double r2 = 2.0 * residual(i, x);
        const double* v = ds_.feature(i);
        Vec g(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) g[k] = r2 * v[k];
        return g;
    }

    Matrix per_sample_hessian(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "linreg x");
        const double* v = ds_.feature(i);
        Matrix h(dim(), dim());
        for (std::size_t r = 0; r < dim(); ++r)
            for (std::size_t c = 0; c < dim(); ++c) h(r, c) = 2.0 * v[r] * v[c];
        return h;
    }

private:
    double residual(std::size_t i, const Vec& x) const {
        require_dim(x, dim(), "linreg x");
        const double* v = ds_.feature(i);
        double p = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) p += v[k] * x[k];
        return p - ds_.target(i);
    }

    Dataset ds_;
};

/// One-hidden-layer net: yhat(v) = sum_j W2[j] * act(<W1 row j, v>),
/// f_i = (yhat(v_i) - y_i)^2. Weights are packed as
/// x = [W1 row-major (h*m), W2 (h)], d = h*m + h.
class TwoLayerModel final : public LossModel {
public:
    enum class Activation { Tanh, Identity };

    TwoLayerModel(Dataset ds, std::size_t hidden_width, Activation act)
        : ds_(std::move(ds)), h_(hidden_width), act_(act) {
        if (h_ == 0) throw ConfigError("two_layer: hidden_width must be >= 1");
    }

    std::size_t num_samples() const override { return ds_.size(); }
    std::size_t dim() const override { return h_ * ds_.feature_dim() + h_; }
    std::string architecture() const override { return "two_layer"; }

    double per_sample_value(std::size_t i, const Vec& x) const override {
        const double r = predict(i, x) - ds_.target(i);
        return r * r;
    }

    Vec per_sample_grad(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "two_layer x");
        const std::size_t m = ds_.feature_dim();
        const double* v = ds_.feature(i);
        const double* w2 = x.data() + h_ * m;

        Vec pre(h_), hid(h_);
        for (std::size_t j = 0; j < h_; ++j) {
            const double* row = x.data() + j * m;
            double z = 0.0;
            for (std::size_t k = 0; k < m; ++k) z += row[k] * v[k];
            pre[j] = z;
            hid[j] = activate(z);
        }
        double yhat = 0.0;
        for (std::size_t j = 0; j < h_; ++j) yhat += w2[j] * hid[j];

        const double r2 = 2.0 * (yhat - ds_.target(i));
        Vec g(dim(), 0.0);
        for (std::size_t j = 0; j < h_; ++j) {
            const double back = r2 * w2[j] * activate_deriv(pre[j]);
            double* grow = g.data() + j * m;
            for (std::size_t k = 0; k < m; ++k) grow[k] = back * v[k];
            g[h_ * m + j] = r2 * hid[j];
        }
        return g;
    }

    /// Central differences of the analytic gradient, then symmetrized.
    Matrix per_sample_hessian(std::size_t i, const Vec& x) const override {
        require_dim(x, dim(), "two_layer x");
        const std::size_t d = dim();
        Matrix h(d, d);
        Vec xp = x;
        for (std::size_t k = 0; k < d; ++k) {
            const double step = 1e-4 * std::max(1.0, std::fabs(x[k]));
            const double saved = xp[k];
            xp[k] = saved + step;
            const Vec gp = per_sample_grad(i, xp);
            xp[k] = saved - step;
            const Vec gm = per_sample_grad(i, xp);
            xp[k] = saved;
            const double inv = 1.0 / (2.0 * step);
            for (std::size_t r = 0; r < d; ++r) h(r, k) = (gp[r] - gm[r]) * inv;
        }
        return symmetrized(h);
    }

private:
    double predict(std::size_t i, const Vec& x) const {
        require_dim(x, dim(), "two_layer x");
        const std::size_t m = ds_.feature_dim();
        const double* v = ds_.feature(i);
        const double* w2 = x.data() + h_ * m;
        double yhat = 0.0;
        for (std::size_t j = 0; j < h_; ++j) {
            const double* row = x.data() + j * m;
            double z = 0.0;
            for (std::size_t k = 0; k < m; ++k) z += row[k] * v[k];
            yhat += w2[j] * activate(z);
        }
        return yhat;
    }

    double activate(double z) const { return act_ == Activation::Tanh ? std::tanh(z) : z; }
    double activate_deriv(double z) const {
        if (act_ == Activation::Identity) return 1.0;
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }

    Dataset ds_;
    std::size_t h_;
    Activation act_;
};

// ---- finite-difference oracles (value-only; no analytic derivatives) ----

inline Vec fd_grad_oracle(const std::function<double(const Vec&)>& f, const Vec& x,
                          double step = 1e-6) {
    if (!(step > 0.0)) throw NumericError("fd_grad_oracle: step must be positive");
    Vec g(x.size());
    Vec xp = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = xp[k];
        xp[k] = saved + step;
        const double fp = f(xp);
        xp[k] = saved - step;
        const double fm = f(xp);
        xp[k] = saved;
        g[k] = (fp - fm) / (2.0 * step);
    }
    return g;
}

inline Matrix fd_hessian_oracle(const std::function<double(const Vec&)>& f, const Vec& x,
                                double step = 1e-4) {
    if (!(step > 0.0)) throw NumericError("fd_hessian_oracle: step must be positive");
    const std::size_t d = x.size();
    Matrix h(d, d);
    Vec xp = x;
    const double f0 = f(x);
    for (std::size_t r = 0; r < d; ++r) {
        // diagonal: (f(x+e) - 2 f(x) + f(x-e)) / step^2
        const double sr = xp[r];
        xp[r] = sr + step;
        const double fp = f(xp);
        xp[r] = sr - step;
        const double fm = f(xp);
        xp[r] = sr;
        h(r, r) = (fp - 2.0 * f0 + fm) / (step * step);
        for (std::size_t c = r + 1; c < d; ++c) {
            const double sc = xp[c];
            xp[r] = sr + step; xp[c] = sc + step;
            const double fpp = f(xp);
            xp[c] = sc - step;
            const double fpm = f(xp);
            xp[r] = sr - step; xp[c] = sc + step;
            const double fmp = f(xp);
            xp[c] = sc - step;
            const double fmm = f(xp);
            xp[r] = sr; xp[c] = sc;
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * step * step);
            h(r, c) = v;
            h(c, r) = v;
        }
    }
    return h;
}

}  // namespace diffmetric
