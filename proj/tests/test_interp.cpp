#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pmint/interp.hpp"

using namespace pmint;

TEST_CASE("spline interpolates the knot values exactly") {
    Vec x(5);
    x << 0.0, 0.3, 0.5, 0.8, 1.0;
    Vec y(5);
    y << 1.0, -2.0, 0.5, 3.0, -1.0;
    SplineFamily fam(x);
    const Vec m = fam.fit(y);
    for (Index i = 0; i < x.size(); ++i)
        REQUIRE(fam.eval(y, m, x[i]) == Catch::Approx(y[i]).margin(1e-12));
}

TEST_CASE("not-a-knot spline reproduces cubic polynomials") {
    auto cubic = [](double t) { return 2.0 - 3.0 * t + 0.5 * t * t - 4.0 * t * t * t; };
    Vec x(6);
    x << -1.0, -0.4, 0.1, 0.35, 0.7, 1.2;
    Vec y(6);
    for (Index i = 0; i < 6; ++i) y[i] = cubic(x[i]);
    SplineFamily fam(x);
    const Vec m = fam.fit(y);
    // interior, knot, and extrapolated points
    for (double t : {-1.3, -0.9, -0.4, -0.12, 0.0, 0.22, 0.5, 0.9, 1.2, 1.5})
        REQUIRE(fam.eval(y, m, t) == Catch::Approx(cubic(t)).margin(1e-10));
}

TEST_CASE("two-point spline is the connecting line") {
    Vec x(2);
    x << 1.0, 3.0;
    Vec y(2);
    y << 2.0, 8.0;
    SplineFamily fam(x);
    const Vec m = fam.fit(y);
    REQUIRE(fam.eval(y, m, 2.0) == Catch::Approx(5.0).margin(1e-13));
    REQUIRE(fam.eval(y, m, 4.0) == Catch::Approx(11.0).margin(1e-13));
}

TEST_CASE("spline against a dense independent reference") {
    // oracle: natural conditions replaced by explicit solve of the full
    // piecewise-cubic coefficient system with not-a-knot closure
    Vec x(7);
    x << 0.0, 0.15, 0.3, 0.45, 0.68, 0.85, 1.0;
    Vec y(7);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (Index i = 0; i < 7; ++i) y[i] = u(rng);
    const Index n = 7, ni = n - 1;
    // unknowns: a_i, b_i, c_i, d_i per interval (value form around x_i)
    Mat A = Mat::Zero(4 * ni, 4 * ni);
    Vec rhs = Vec::Zero(4 * ni);
    Index row = 0;
    auto col = [&](Index i, int k) { return 4 * i + k; };
    for (Index i = 0; i < ni; ++i) {
        const double h = x[i + 1] - x[i];
        A(row, col(i, 0)) = 1.0;
        rhs[row++] = y[i];
        A(row, col(i, 0)) = 1.0;
        A(row, col(i, 1)) = h;
        A(row, col(i, 2)) = h * h;
        A(row, col(i, 3)) = h * h * h;
        rhs[row++] = y[i + 1];
    }
    for (Index i = 0; i + 1 < ni; ++i) {
        const double h = x[i + 1] - x[i];
        A(row, col(i, 1)) = 1.0;
        A(row, col(i, 2)) = 2.0 * h;
        A(row, col(i, 3)) = 3.0 * h * h;
        A(row, col(i + 1, 1)) = -1.0;
        ++row;
        A(row, col(i, 2)) = 2.0;
        A(row, col(i, 3)) = 6.0 * h;
        A(row, col(i + 1, 2)) = -2.0;
        ++row;
    }
    A(row, col(0, 3)) = 1.0;
    A(row, col(1, 3)) = -1.0;
    ++row;
    A(row, col(ni - 2, 3)) = 1.0;
    A(row, col(ni - 1, 3)) = -1.0;
    ++row;
    REQUIRE(row == 4 * ni);
    const Vec coef = A.fullPivLu().solve(rhs);

    SplineFamily fam(x);
    const Vec m = fam.fit(y);
    for (double t = 0.0; t <= 1.0; t += 0.01) {
        Index i = std::upper_bound(x.begin(), x.end(), t) - x.begin();
        i = std::clamp<Index>(i - 1, 0, ni - 1);
        const double s = t - x[i];
        const double ref = coef[col(i, 0)] + coef[col(i, 1)] * s + coef[col(i, 2)] * s * s +
                           coef[col(i, 3)] * s * s * s;
        REQUIRE(fam.eval(y, m, t) == Catch::Approx(ref).margin(1e-10));
    }
}

TEST_CASE("spline rejects bad grids") {
    Vec one(1);
    one << 0.0;
    REQUIRE_THROWS_AS(SplineFamily(one), DomainError);
    Vec dup(3);
    dup << 0.0, 0.5, 0.5;
    REQUIRE_THROWS_AS(SplineFamily(dup), DomainError);
}

TEST_CASE("ridge basis enumerates all tensor monomials") {
    Mat pts(1, 2);
    pts << 0.5, 0.5;
    RidgeFamily fam(pts, 3);
    REQUIRE(fam.n_features() == 16);
    Vec p(2);
    p << 2.0, 3.0;
    const Vec phi = fam.features(p);
    // every product 2^a * 3^b with a,b in 0..3 appears exactly once
    std::vector<double> want, got;
    for (int a = 0; a <= 3; ++a)
        for (int b = 0; b <= 3; ++b) want.push_back(std::pow(2.0, a) * std::pow(3.0, b));
    for (Index j = 0; j < phi.size(); ++j) got.push_back(phi[j]);
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    for (size_t j = 0; j < want.size(); ++j)
        REQUIRE(got[j] == Catch::Approx(want[j]).margin(1e-12));
}

TEST_CASE("ridge recovers a cubic trend from ample data") {
    auto f = [](double a, double b) {
        return 1.0 + 2.0 * a - b + 0.5 * a * a * b - a * b * b + 0.25 * a * a * a;
    };
    const int g = 6;
    Mat pts(g * g, 2);
    Vec y(g * g);
    Index k = 0;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j, ++k) {
            pts(k, 0) = i / (g - 1.0);
            pts(k, 1) = j / (g - 1.0);
            y[k] = f(pts(k, 0), pts(k, 1));
        }
    RidgeFamily fam(pts, 3, 1e-10);
    const Vec beta = fam.fit(y);
    Vec p(2);
    p << 0.37, 0.81;
    REQUIRE(fam.eval(beta, p) == Catch::Approx(f(0.37, 0.81)).margin(1e-6));
}

TEST_CASE("ridge against the normal-equation oracle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat pts(12, 2);
    Vec y(12);
    for (Index k = 0; k < 12; ++k) {
        pts(k, 0) = u(rng);
        pts(k, 1) = u(rng);
        y[k] = u(rng);
    }
    const double lambda = 1e-5;
    RidgeFamily fam(pts, 3, lambda);
    Mat X(12, fam.n_features());
    for (Index k = 0; k < 12; ++k) X.row(k) = fam.features(pts.row(k).transpose()).transpose();
    Mat G = X.transpose() * X;
    G.diagonal().array() += lambda;
    const Vec ref = G.fullPivLu().solve(X.transpose() * y);
    const Vec beta = fam.fit(y);
    REQUIRE((beta - ref).norm() < 1e-9 * (1.0 + ref.norm()));
}

TEST_CASE("ridge shrinks toward zero as lambda grows") {
    Mat pts(4, 1);
    pts << 0.0, 0.3, 0.6, 1.0;
    Vec y(4);
    y << 1.0, 2.0, 1.5, 3.0;
    RidgeFamily small(pts, 3, 1e-8), big(pts, 3, 1e4);
    REQUIRE(big.fit(y).norm() < small.fit(y).norm());
}
