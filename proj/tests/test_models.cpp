#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "diffmetric/dataset.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/rng.hpp"

using namespace diffmetric;

namespace {

Dataset make_dataset(std::size_t m, std::vector<double> feats, std::vector<double> targets) {
    return Dataset(m, std::move(feats), std::move(targets));
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("dataset basic accessors", "[models]") {
    const Dataset ds = make_dataset(2, {1.0, 2.0, 3.0, 4.0}, {10.0, 20.0});
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.feature_dim() == 2);
    REQUIRE(ds.feature(1)[0] == 3.0);
    REQUIRE(ds.target(0) == 10.0);
    REQUIRE(ds.feature_vec(1) == Vec{3.0, 4.0});
}

TEST_CASE("dataset rejects malformed construction", "[models]") {
    REQUIRE_THROWS_AS(make_dataset(2, {}, {}), ConfigError);
    REQUIRE_THROWS_AS(make_dataset(2, {1.0}, {1.0}), ConfigError);
    REQUIRE_THROWS_AS(make_dataset(1, {std::nan("")}, {1.0}), ConfigError);
}

TEST_CASE("dataset csv round trip", "[models]") {
    const std::string path = "test_models_roundtrip.csv";
    const Dataset ds = make_dataset(2, {0.5, -1.25, 1e-17, 3.0}, {2.0, -7.5});
    write_dataset_csv(ds, path);
    const Dataset back = load_dataset_csv(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back.feature_dim() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(back.target(i) == ds.target(i));
        for (std::size_t j = 0; j < 2; ++j) REQUIRE(back.feature(i)[j] == ds.feature(i)[j]);
    }
    std::remove(path.c_str());
}

TEST_CASE("dataset csv rejects bad input", "[models]") {
    const std::string path = "test_models_bad.csv";

    write_file(path, "feat_0,label\n1.0,2.0\n");
    REQUIRE_THROWS_AS(load_dataset_csv(path), ConfigError);

    write_file(path, "feat_0,target\n1.0,abc\n");
    REQUIRE_THROWS_AS(load_dataset_csv(path), ConfigError);

    write_file(path, "feat_0,target\n1.0\n");
    REQUIRE_THROWS_AS(load_dataset_csv(path), ConfigError);

    write_file(path, "feat_0,target\n");
    REQUIRE_THROWS_AS(load_dataset_csv(path), ConfigError);

    write_file(path, "feat_1,feat_0,target\n1.0,2.0,3.0\n");
    REQUIRE_THROWS_AS(load_dataset_csv(path), ConfigError);

    REQUIRE_THROWS_AS(load_dataset_csv("no_such_file.csv"), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("quadratic model values and derivatives", "[models]") {
    // f_0(x) = 1 * (x - 0)^2
    const QuadraticModel model(make_dataset(1, {0.0}, {1.0}));
    REQUIRE(model.per_sample_value(0, {2.0}) == 4.0);
    REQUIRE(model.per_sample_grad(0, {3.0}) == Vec{6.0});
    REQUIRE(model.per_sample_hessian(0, {3.0})(0, 0) == 2.0);

    // two samples, 2d: f_0 = 2||x-(1,0)||^2, f_1 = 0.5||x-(0,1)||^2
    const QuadraticModel m2(make_dataset(2, {1.0, 0.0, 0.0, 1.0}, {2.0, 0.5}));
    const Vec x = {1.0, 1.0};
    REQUIRE(m2.total_value(x) == Catch::Approx(2.0 * 1.0 + 0.5 * 1.0));
    const Vec g = m2.total_grad(x);
    REQUIRE(g[0] == Catch::Approx(2.0 * 2.0 * 0.0 + 2.0 * 0.5 * 1.0));
    REQUIRE(g[1] == Catch::Approx(2.0 * 2.0 * 1.0 + 2.0 * 0.5 * 0.0));
    const Matrix h = m2.total_hessian(x);
    REQUIRE(h(0, 0) == Catch::Approx(5.0));
    REQUIRE(h(0, 1) == 0.0);
}

TEST_CASE("linear regression model values and derivatives", "[models]") {
    // v_0 = (1, 2), y_0 = 3: zero residual at x = (1, 1)
    const LinearRegressionModel model(make_dataset(2, {1.0, 2.0}, {3.0}));
    REQUIRE(model.per_sample_value(0, {1.0, 1.0}) == 0.0);
    REQUIRE(model.per_sample_grad(0, {1.0, 1.0}) == Vec{0.0, 0.0});

    // at x = (2, 1): residual = 2 + 2 - 3 = 1
    REQUIRE(model.per_sample_value(0, {2.0, 1.0}) == 1.0);
    REQUIRE(model.per_sample_grad(0, {2.0, 1.0}) == Vec{2.0, 4.0});
    const Matrix h = model.per_sample_hessian(0, {2.0, 1.0});
    REQUIRE(h(0, 0) == 2.0);
    REQUIRE(h(0, 1) == 4.0);
    REQUIRE(h(1, 1) == 8.0);
}

TEST_CASE("two layer model with zero weights", "[models]") {
    const TwoLayerModel model(make_dataset(1, {0.7}, {3.0}), 2, TwoLayerModel::Activation::Tanh);
    REQUIRE(model.dim() == 2 * 1 + 2);
    const Vec zero(model.dim(), 0.0);
    REQUIRE(model.per_sample_value(0, zero) == 9.0);  // yhat = 0 -> (0 - 3)^2
}

TEST_CASE("two layer identity activation matches bilinear form", "[models]") {
    // yhat = w2 . (W1 v); with h=1, m=1: yhat = w2 * w1 * v
    const TwoLayerModel model(make_dataset(1, {2.0}, {5.0}), 1,
                              TwoLayerModel::Activation::Identity);
    const Vec x = {1.5, 3.0};  // w1 = 1.5, w2 = 3.0 -> yhat = 9
    REQUIRE(model.per_sample_value(0, x) == Catch::Approx(16.0));
    const Vec g = model.per_sample_grad(0, x);
    // d/dw1 = 2r * w2 * v = 2*4*3*2 = 48, d/dw2 = 2r * w1 * v = 2*4*3 = 24
    REQUIRE(g[0] == Catch::Approx(48.0));
    REQUIRE(g[1] == Catch::Approx(24.0));
}

TEST_CASE("two layer analytic gradient matches finite differences", "[models]") {
    const Dataset ds = make_dataset(3, {0.1, -0.4, 0.9, 1.2, 0.3, -0.7, -0.5, 0.6, 0.2},
                                    {1.0, -2.0, 0.5});
    const TwoLayerModel model(ds, 4, TwoLayerModel::Activation::Tanh);
    Rng rng(20240816);
    for (int trial = 0; trial < 100; ++trial) {
        Vec x(model.dim());
        for (auto& xi : x) xi = rng.normal();
        for (std::size_t i = 0; i < model.num_samples(); ++i) {
            const Vec g = model.per_sample_grad(i, x);
            const Vec g_fd = fd_grad_oracle(
                [&](const Vec& p) { return model.per_sample_value(i, p); }, x);
            const double scale = std::max(1.0, inf_norm(g));
            REQUIRE(inf_norm(g - g_fd) / scale < 1e-5);
        }
    }
}

TEST_CASE("two layer hessian is symmetric and matches value-only oracle", "[models]") {
    const Dataset ds = make_dataset(2, {0.3, -0.8, 1.1, 0.4}, {0.9, -1.3});
    const TwoLayerModel model(ds, 3, TwoLayerModel::Activation::Tanh);
    Rng rng(7);
    Vec x(model.dim());
    for (auto& xi : x) xi = 0.5 * rng.normal();
    for (std::size_t i = 0; i < model.num_samples(); ++i) {
        const Matrix h = model.per_sample_hessian(i, x);
        REQUIRE(asymmetry(h) == 0.0);
        const Matrix h_fd = fd_hessian_oracle(
            [&](const Vec& p) { return model.per_sample_value(i, p); }, x);
        REQUIRE(max_abs_diff(h, h_fd) < 1e-4 * std::max(1.0, max_abs(h)));
    }
}

TEST_CASE("fd oracles on closed-form functions", "[models]") {
    const auto cube = [](const Vec& p) { return p[0] * p[0] * p[0]; };
    const Vec g = fd_grad_oracle(cube, {1.0});
    REQUIRE(std::fabs(g[0] - 3.0) < 1e-7);

    const auto quart = [](const Vec& p) { return p[0] * p[0] * p[0] * p[0]; };
    const Matrix h = fd_hessian_oracle(quart, {1.0});
    REQUIRE(std::fabs(h(0, 0) - 12.0) < 1e-4);

    // f(x, y) = x^2 y: hessian [[2y, 2x], [2x, 0]]
    const auto f = [](const Vec& p) { return p[0] * p[0] * p[1]; };
    const Matrix hxy = fd_hessian_oracle(f, {1.0, 2.0});
    REQUIRE(std::fabs(hxy(0, 0) - 4.0) < 1e-5);
    REQUIRE(std::fabs(hxy(0, 1) - 2.0) < 1e-5);
    REQUIRE(std::fabs(hxy(1, 0) - 2.0) < 1e-5);
    REQUIRE(std::fabs(hxy(1, 1) - 0.0) < 1e-5);

    REQUIRE_THROWS_AS(fd_grad_oracle(cube, {1.0}, 0.0), NumericError);
    REQUIRE_THROWS_AS(fd_hessian_oracle(cube, {1.0}, -1.0), NumericError);
}

TEST_CASE("total value and grad are plain sums", "[models]") {
    const QuadraticModel model(make_dataset(1, {0.0, 1.0, 2.0}, {1.0, 2.0, 3.0}));
    const Vec x = {4.0};
    double v = 0.0;
    Vec g(1, 0.0);
    for (std::size_t i = 0; i < model.num_samples(); ++i) {
        v += model.per_sample_value(i, x);
        g[0] += model.per_sample_grad(i, x)[0];
    }
    REQUIRE(model.total_value(x) == v);
    REQUIRE(model.total_grad(x) == g);
}

TEST_CASE("rng streams are deterministic", "[models]") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.uniform01() == b.uniform01());
    Rng c(42), d(43);
    REQUIRE(c.normal() != d.normal());

    Rng e(1);
    const auto idx = e.sample_without_replacement(10, 4);
    REQUIRE(idx.size() == 4);
    for (std::size_t i = 1; i < idx.size(); ++i) REQUIRE(idx[i - 1] < idx[i]);

    REQUIRE(derive_seed(5, 0) != derive_seed(5, 1));
    REQUIRE(derive_seed(5, 0) == derive_seed(5, 0));
}

TEST_CASE("linalg kernels against frozen values", "[models]") {
    Matrix a(2, 2);
    a(0, 0) = 2.0; a(0, 1) = 1.0;
    a(1, 0) = 1.0; a(1, 1) = 2.0;
    const auto eigs = jacobi_eigenvalues(a);
    REQUIRE(eigs.size() == 2);
    REQUIRE(eigs[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(eigs[1] == Catch::Approx(3.0).margin(1e-12));

    const Matrix inv = gauss_inverse(a);
    // inverse of [[2,1],[1,2]] is (1/3)[[2,-1],[-1,2]]
    REQUIRE(inv(0, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
    REQUIRE(inv(0, 1) == Catch::Approx(-1.0 / 3.0).epsilon(1e-14));

    Matrix sing(2, 2);
    sing(0, 0) = 1.0; sing(0, 1) = 2.0;
    sing(1, 0) = 2.0; sing(1, 1) = 4.0;
    REQUIRE_THROWS_AS(gauss_inverse(sing), NumericError);

    Matrix big(3, 3);
    Rng rng(99);
    for (std::size_t k = 0; k < 9; ++k) big.data()[k] = rng.normal();
    const Matrix prod = matmul(big, gauss_inverse(big));
    REQUIRE(max_abs_diff(prod, Matrix::identity(3)) < 1e-10);
}
