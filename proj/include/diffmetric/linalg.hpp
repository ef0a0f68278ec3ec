#pragma once

// Dense linear algebra for small symmetric systems (d <= a few hundred).
// Row-major storage, plain loops; no blocking, no external BLAS.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "diffmetric/common.hpp"

namespace diffmetric {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    double* row(std::size_t i) { return a_.data() + i * cols_; }
    const double* row(std::size_t i) const { return a_.data() + i * cols_; }

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

// ---- vector helpers ---------------------------------------------------------

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double inf_norm(const Vec& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline Vec operator+(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vec operator*(double s, Vec a) {
    for (double& x : a) x *= s;
    return a;
}

inline void axpy(double s, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vec matvec(const Matrix& m, const Vec& v) {
    Vec out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * v[j];
        out[i] = s;
    }
    return out;
}

// ---- matrix helpers ---------------------------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline double max_abs(const Matrix& m) {
    double v = 0.0;
    for (double x : m.data()) v = std::max(v, std::abs(x));
    return v;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        v = std::max(v, std::abs(a.data()[i] - b.data()[i]));
    return v;
}

inline double asymmetry(const Matrix& m) {
    double v = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            v = std::max(v, std::abs(m(i, j) - m(j, i)));
    return v;
}

inline Matrix symmetrized(const Matrix& m) {
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
/// Throws NumericError on a numerically singular pivot.
inline Matrix gauss_inverse(Matrix m) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw NumericError("gauss_inverse: matrix not square");
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(m(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(m(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best)) {
            throw NumericError("gauss_inverse: singular matrix");
        }
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(piv, j), m(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        }
        const double d = 1.0 / m(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            m(col, j) *= d;
            inv(col, j) *= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
inline std::vector<double> jacobi_eigenvalues(Matrix m) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw NumericError("jacobi_eigenvalues: matrix not square");
    if (n == 0) return {};
    if (n == 1) return {m(0, 0)};

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += m(i, j) * m(i, j);
        return std::sqrt(2.0 * s);
    };

    const double scale = std::max(max_abs(m), 1e-300);
    const double tol = 1e-14 * scale * static_cast<double>(n);
    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p < n - 1; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = m(k, p);
                    const double akq = m(k, q);
                    m(k, p) = c * akp - s * akq;
                    m(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = m(p, k);
                    const double aqk = m(q, k);
                    m(p, k) = c * apk - s * aqk;
                    m(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = m(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace diffmetric
