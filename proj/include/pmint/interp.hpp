#pragma once

#include <algorithm>
#include <vector>

#include "pmint/core.hpp"

namespace pmint {

/// Cubic spline family with not-a-knot end conditions over a fixed ascending
/// grid; the factorization is shared across many value vectors.
class SplineFamily {
  public:
    explicit SplineFamily(Vec x) : x_(std::move(x)) {
        const Index n = x_.size();
        if (n < 2) throw DomainError("spline: need at least 2 points");
        for (Index i = 0; i + 1 < n; ++i)
            if (!(x_[i] < x_[i + 1])) throw DomainError("spline: grid must be strictly ascending");
        if (n == 2) return;  // linear, no system to solve
        Mat A = Mat::Zero(n, n);
        for (Index i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
            A(i, i - 1) = hl;
            A(i, i) = 2.0 * (hl + hr);
            A(i, i + 1) = hr;
        }
        // not-a-knot: third derivative continuous across the 2nd and (n-1)th knot
        const double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
        A(0, 0) = h1;
        A(0, 1) = -(h0 + h1);
        A(0, 2) = h0;
        const double hm = x_[n - 1] - x_[n - 2], hm1 = x_[n - 2] - x_[n - 3];
        A(n - 1, n - 3) = hm;
        A(n - 1, n - 2) = -(hm1 + hm);
        A(n - 1, n - 1) = hm1;
        lu_.compute(A);
    }

    const Vec& grid() const { return x_; }

    /// Second derivatives at the knots for values y.
    Vec fit(const Vec& y) const {
        const Index n = x_.size();
        if (y.size() != n) throw DomainError("spline: value size mismatch");
        if (n == 2) return Vec::Zero(2);
        Vec rhs = Vec::Zero(n);
        for (Index i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl);
        }
        return lu_.solve(rhs);
    }

    /// Evaluate the spline with knot values y and second derivatives m at t.
    /// Points beyond the grid use the end polynomial.
    double eval(const Vec& y, const Vec& m, double t) const {
        const Index n = x_.size();
        Index i = std::upper_bound(x_.begin(), x_.end(), t) - x_.begin();
        i = std::clamp<Index>(i - 1, 0, n - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
        return a * y[i] + b * y[i + 1] +
               ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
    }

  private:
    Vec x_;
    Eigen::PartialPivLU<Mat> lu_;
};

/// Ridge regression on the tensor-product monomial basis with per-variable
/// degree <= `degree` over normalized coordinates; factorization shared.
class RidgeFamily {
  public:
    RidgeFamily(const Mat& points, int degree = 3, double lambda = 1e-5)
        : dim_((int)points.cols()), degree_(degree) {
        if (points.rows() < 1) throw DomainError("ridge: need at least one point");
        build_exponents();
        Mat X(points.rows(), (Index)exponents_.size());
        for (Index k = 0; k < points.rows(); ++k)
            X.row(k) = features(points.row(k).transpose()).transpose();
        Mat G = X.transpose() * X;
        G.diagonal().array() += lambda;
        ldlt_.compute(G);
        Xt_ = X.transpose();
    }

    Index n_features() const { return (Index)exponents_.size(); }

    Vec fit(const Vec& y) const { return ldlt_.solve(Xt_ * y); }

    double eval(const Vec& beta, const Vec& p) const { return features(p).dot(beta); }

    Vec features(const Vec& p) const {
        if ((int)p.size() != dim_) throw DomainError("ridge: dimension mismatch");
        Vec phi((Index)exponents_.size());
        for (size_t j = 0; j < exponents_.size(); ++j) {
            double v = 1.0;
            for (int k = 0; k < dim_; ++k)
                for (int e = 0; e < exponents_[j][k]; ++e) v *= p[k];
            phi[(Index)j] = v;
        }
        return phi;
    }

  private:
    void build_exponents() {
        std::vector<int> cur(dim_, 0);
        while (true) {
            exponents_.push_back(cur);
            int k = 0;
            while (k < dim_ && cur[k] == degree_) cur[k++] = 0;
            if (k == dim_) break;
            cur[k]++;
        }
    }

    int dim_;
    int degree_;
    std::vector<std::vector<int>> exponents_;
    Mat Xt_;
    Eigen::LDLT<Mat> ldlt_;
};

}  // namespace pmint
