#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "pmint/core.hpp"

namespace pmint {

/// Mass-normalized undamped modes, frequencies ascending.
struct ModalData {
    Vec omega;  // angular eigenfrequencies [rad/s]
    Mat Phi;    // n x m, Phi^T M Phi = I
};

namespace detail {

inline void fix_signs(Mat& Phi) {
    for (Index j = 0; j < Phi.cols(); ++j) {
        Index imax = 0;
        Phi.col(j).cwiseAbs().maxCoeff(&imax);
        if (Phi(imax, j) < 0.0) Phi.col(j) = -Phi.col(j);
    }
}

inline ModalData solve_modes_dense(const SystemMatrices& sys, Index m) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Mat(sys.K), Mat(sys.M));
    if (es.info() != Eigen::Success)
        throw NumericError("dense generalized eigensolver failed");
    ModalData md;
    md.omega = es.eigenvalues().head(m).cwiseMax(0.0).cwiseSqrt();
    md.Phi = es.eigenvectors().leftCols(m);  // already M-normalized
    fix_signs(md.Phi);
    return md;
}

}  // namespace detail

/// Smallest m modes of (omega^2 M + K) Phi = 0 via shift-invert subspace
/// iteration at sigma = 0 (sparse Cholesky of K), dense fallback for small n.
inline ModalData solve_modes(const SystemMatrices& sys, Index m) {
    const Index n = sys.n;
    if (m > n) throw DomainError("solve_modes: m > n");
    if (n <= 400) return detail::solve_modes_dense(sys, m);

    Eigen::SimplicialLDLT<SpMat> kinv(sys.K);
    if (kinv.info() != Eigen::Success) {
        if (n <= 2000) return detail::solve_modes_dense(sys, m);
        throw NumericError("sparse factorization of K failed and n too large for dense fallback");
    }

    const Index b = std::min(n, m + std::max<Index>(8, m / 2));
    std::mt19937_64 rng(0x5eed5eedULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat X(n, b);
    for (Index j = 0; j < b; ++j)
        for (Index i = 0; i < n; ++i) X(i, j) = gauss(rng);

    Vec lambda_prev = Vec::Constant(m, std::numeric_limits<double>::max());
    Vec lambda(m);
    const int maxit = 400;
    for (int it = 0; it < maxit; ++it) {
        Mat Y = kinv.solve(sys.M * X);
        // M-orthonormalize via the Gram matrix
        Mat G = Y.transpose() * (sys.M * Y);
        Eigen::SelfAdjointEigenSolver<Mat> ge(G);
        Vec ev = ge.eigenvalues();
        double gmax = ev.maxCoeff();
        Mat W(b, b);
        Index nk = 0;
        for (Index j = 0; j < b; ++j)
            if (ev[j] > gmax * 1e-28)
                W.col(nk++) = ge.eigenvectors().col(j) / std::sqrt(ev[j]);
        if (nk < m) throw NumericError("subspace collapsed in modal solver");
        Y = Y * W.leftCols(nk);

        Mat A = Y.transpose() * (sys.K * Y);
        A = 0.5 * (A + A.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> rs(A);
        X = Y * rs.eigenvectors();
        Vec lam = rs.eigenvalues();
        lambda = lam.head(m);

        double rel = 0.0;
        for (Index i = 0; i < m; ++i)
            rel = std::max(rel, std::abs(lambda[i] - lambda_prev[i]) /
                                    std::max(std::abs(lambda[i]), 1e-300));
        lambda_prev = lambda;
        if (rel < 1e-11 && it > 2) {
            ModalData md;
            md.omega = lambda.cwiseMax(0.0).cwiseSqrt();
            md.Phi = X.leftCols(m);
            detail::fix_signs(md.Phi);
            return md;
        }
        if (nk < b) X.conservativeResize(n, nk);
        if (X.cols() != b) {
            // replenish deflated directions
            Mat Xn(n, b);
            Xn.leftCols(X.cols()) = X;
            for (Index j = X.cols(); j < b; ++j)
                for (Index i = 0; i < n; ++i) Xn(i, j) = gauss(rng);
            X = Xn;
        }
    }
    if (n <= 2000) return detail::solve_modes_dense(sys, m);
    throw NumericError("modal solver did not converge");
}

enum class ModeSelection { lowest, dominant };

/// Indices of the r modes to keep. `dominant` ranks by |(g phi)(phi^T f)| / omega,
/// rigid-body modes (omega = 0) rank first. Ties break on the lowest index.
inline std::vector<Index> select_modes(const ModalData& md, const SystemMatrices& sys,
                                       Index r, ModeSelection strategy) {
    const Index m = md.omega.size();
    if (r > m) throw DomainError("select_modes: r > number of computed modes");
    std::vector<Index> idx(m);
    std::iota(idx.begin(), idx.end(), Index{0});
    if (strategy == ModeSelection::lowest) {
        idx.resize(r);
        return idx;
    }
    Vec score(m);
    for (Index i = 0; i < m; ++i) {
        double num = std::abs((sys.g * md.Phi.col(i)).value() * md.Phi.col(i).dot(sys.f));
        score[i] = md.omega[i] > 0.0 ? num / md.omega[i]
                                     : std::numeric_limits<double>::infinity();
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return score[a] > score[b]; });
    idx.resize(r);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Modal reduced basis: selected columns, re-orthonormalized by thin QR.
inline Mat modal_basis(const ModalData& md, const std::vector<Index>& keep) {
    Mat V(md.Phi.rows(), static_cast<Index>(keep.size()));
    for (Index j = 0; j < V.cols(); ++j) V.col(j) = md.Phi.col(keep[j]);
    Eigen::HouseholderQR<Mat> qr(V);
    Mat Q = qr.householderQ() * Mat::Identity(V.rows(), V.cols());
    // keep a deterministic orientation
    Mat Rf = qr.matrixQR().topRows(V.cols()).triangularView<Eigen::Upper>();
    for (Index j = 0; j < V.cols(); ++j)
        if (Rf(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

/// Galerkin projection onto an orthonormal basis V.
inline ReducedModel reduce(const SystemMatrices& sys, const Mat& V) {
    if (V.rows() != sys.n) throw DomainError("reduce: basis row count != n");
    const double orth = (V.transpose() * V - Mat::Identity(V.cols(), V.cols()))
                            .cwiseAbs()
                            .maxCoeff();
    if (orth > 1e-8) throw NumericError("reduce: basis is not orthonormal");
    ReducedModel rm;
    rm.r = V.cols();
    rm.V = V;
    rm.M_r = V.transpose() * (sys.M * V);
    rm.C_r = V.transpose() * (sys.C * V);
    rm.K_r = V.transpose() * (sys.K * V);
    rm.M_r = 0.5 * (rm.M_r + rm.M_r.transpose()).eval();
    rm.K_r = 0.5 * (rm.K_r + rm.K_r.transpose()).eval();
    rm.f_r = V.transpose() * sys.f;
    rm.g_r = sys.g * V;
    return rm;
}

/// Frequency grid in angular frequency, linearly spaced in Hz.
inline Vec frequency_grid(double f_lo_hz, double f_hi_hz, Index count) {
    if (!(f_lo_hz > 0.0) || !(f_hi_hz > f_lo_hz) || count < 2)
        throw ConfigError("invalid frequency band");
    Vec w(count);
    for (Index i = 0; i < count; ++i)
        w[i] = 2.0 * kPi *
               (f_lo_hz + (f_hi_hz - f_lo_hz) * double(i) / double(count - 1));
    return w;
}

/// FRF of the full model, one sparse complex factorization per frequency.
inline CVec transfer_function(const SystemMatrices& sys, const Vec& freqs) {
    if (freqs.size() == 0) throw DomainError("transfer_function: empty frequency grid");
    using Cplx = std::complex<double>;
    SpCMat Kc = sys.K.cast<Cplx>();
    SpCMat Cc = sys.C.cast<Cplx>();
    SpCMat Mc = sys.M.cast<Cplx>();
    CVec fc = sys.f.cast<Cplx>();
    Eigen::SparseLU<SpCMat> lu;
    CVec H(freqs.size());
    for (Index i = 0; i < freqs.size(); ++i) {
        const double w = freqs[i];
        SpCMat A = Kc + Cplx(0.0, w) * Cc - (w * w) * Mc;
        A.makeCompressed();
        if (i == 0) lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success)
            throw NumericError("singular dynamic stiffness at omega = " + std::to_string(w));
        CVec x = lu.solve(fc);
        H[i] = (sys.g.cast<Cplx>() * x).value();
    }
    return H;
}

/// FRF of a reduced model (dense solves).
inline CVec transfer_function(const ReducedModel& rm, const Vec& freqs) {
    if (freqs.size() == 0) throw DomainError("transfer_function: empty frequency grid");
    using Cplx = std::complex<double>;
    CMat Kc = rm.K_r.cast<Cplx>(), Cc = rm.C_r.cast<Cplx>(), Mc = rm.M_r.cast<Cplx>();
    CVec fc = rm.f_r.cast<Cplx>();
    Eigen::RowVectorXcd gc = rm.g_r.cast<Cplx>();
    CVec H(freqs.size());
    for (Index i = 0; i < freqs.size(); ++i) {
        const double w = freqs[i];
        CMat A = Kc + Cplx(0.0, w) * Cc - (w * w) * Mc;
        Eigen::PartialPivLU<CMat> lu(A);
        CVec x = lu.solve(fc);
        if (!x.allFinite())
            throw NumericError("singular reduced dynamic stiffness at omega = " + std::to_string(w));
        H[i] = (gc * x).value();
    }
    return H;
}

/// Relative H2 error by trapezoidal quadrature on the given grid. The
/// integrand is the first power of the magnitude; `squared` switches to
/// the squared-magnitude variant for sensitivity checks.
inline double relative_h2_error(const CVec& H, const CVec& H_r, const Vec& freqs,
                                bool squared = false) {
    if (H.size() != H_r.size() || H.size() != freqs.size() || H.size() < 2)
        throw DomainError("relative_h2_error: mismatched or too-short inputs");
    auto trapz = [&](auto&& f) {
        double acc = 0.0;
        for (Index i = 0; i + 1 < freqs.size(); ++i)
            acc += 0.5 * (freqs[i + 1] - freqs[i]) * (f(i) + f(i + 1));
        return acc;
    };
    auto mag = [&](const CVec& v) {
        return [&v, squared](Index i) {
            double a = std::abs(v[i]);
            return squared ? a * a : a;
        };
    };
    CVec diff = H - H_r;
    const double num = trapz(mag(diff));
    const double den = trapz(mag(H));
    if (den == 0.0) throw NumericError("relative_h2_error: reference response identically zero");
    return std::sqrt(num / den);
}

}  // namespace pmint
