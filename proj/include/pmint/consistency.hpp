#pragma once

#include <Eigen/SVD>

#include <vector>

#include "pmint/core.hpp"

namespace pmint {

/// Principal angles between the column spans of two orthonormal bases.
struct PrincipalAngles {
    Vec theta;  // [deg], ascending in [0, 90]
    Mat W;      // left singular factor of V_i^T V_j
    Mat Z;      // right singular factor
    Vec sigma;  // singular values, descending, clipped to [0, 1]

    double largest_deg() const { return theta.size() ? theta[theta.size() - 1] : 0.0; }
};

namespace detail {
inline void require_orthonormal(const Mat& V, const char* who) {
    double dev = (V.transpose() * V - Mat::Identity(V.cols(), V.cols())).cwiseAbs().maxCoeff();
    if (dev > 1e-6)
        throw NumericError(std::string(who) + ": input basis is not orthonormal (dev=" +
                           std::to_string(dev) + ")");
}
}  // namespace detail

inline PrincipalAngles principal_angles(const Mat& Vi, const Mat& Vj) {
    if (Vi.rows() != Vj.rows()) throw DomainError("principal_angles: row mismatch");
    detail::require_orthonormal(Vi, "principal_angles");
    detail::require_orthonormal(Vj, "principal_angles");
    Eigen::JacobiSVD<Mat> svd(Vi.transpose() * Vj, Eigen::ComputeFullU | Eigen::ComputeFullV);
    PrincipalAngles pa;
    pa.W = svd.matrixU();
    pa.Z = svd.matrixV();
    pa.sigma = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);
    pa.theta = Vec(pa.sigma.size());
    // sine-form refinement for small angles, where arccos loses half the digits
    Mat S = Vj * pa.Z - Vi * (Vi.transpose() * (Vj * pa.Z));
    for (Index l = 0; l < pa.sigma.size(); ++l) {
        if (pa.sigma[l] > 0.7071) {
            double s = std::min(S.col(l).norm(), 1.0);
            pa.theta[l] = rad2deg(std::asin(s));
        } else {
            pa.theta[l] = rad2deg(std::acos(pa.sigma[l]));
        }
    }
    std::sort(pa.theta.begin(), pa.theta.end());
    return pa;
}

inline double largest_angle_deg(const Mat& Vi, const Mat& Vj) {
    return principal_angles(Vi, Vj).largest_deg();
}

/// Reference basis: first r left singular vectors of [V_1 ... V_K].
struct ReferenceBasis {
    Mat R;  // n x r, orthonormal
    std::vector<int> source_sample_ids;
};

inline ReferenceBasis reference_basis(const std::vector<Mat>& bases,
                                      std::vector<int> ids = {}) {
    if (bases.empty()) throw DomainError("reference_basis: empty library");
    const Index n = bases.front().rows();
    const Index r = bases.front().cols();
    Index cols = 0;
    for (const auto& V : bases) {
        if (V.rows() != n || V.cols() != r)
            throw DomainError("reference_basis: inconsistent basis shapes");
        cols += V.cols();
    }
    Mat concat(n, cols);
    Index c = 0;
    for (const auto& V : bases) {
        concat.middleCols(c, V.cols()) = V;
        c += V.cols();
    }
    Eigen::BDCSVD<Mat> svd(concat, Eigen::ComputeThinU);
    ReferenceBasis rb;
    rb.R = svd.matrixU().leftCols(r);
    rb.source_sample_ids = std::move(ids);
    return rb;
}

/// T = (R^T V)^-1 with a condition-number guard. Beyond `cond_limit` the
/// basis is treated as inconsistent with R instead of producing garbage.
struct Transformation {
    Mat T;
    double condition = 0.0;
};

inline Transformation transformation(const Mat& V, const ReferenceBasis& rb,
                                     double cond_limit = 1e12) {
    Mat P = rb.R.transpose() * V;
    Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec sv = svd.singularValues();
    const double smax = sv[0];
    const double smin = sv[sv.size() - 1];
    Transformation tr;
    tr.condition = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    // orthonormal factors bound smax by 1, so a uniformly tiny product is
    // singular even when its condition number looks fine
    const double smin_floor = std::max(smax, 1.0) / cond_limit;
    if (!(tr.condition <= cond_limit) || smin < smin_floor)
        throw NumericError("singular transformation: cond(R^T V) = " +
                           std::to_string(tr.condition));
    tr.T = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return tr;
}

/// Reduced model expressed in the reference coordinates.
struct TransformedModel {
    ReducedModel base;  // untransformed model (keeps V)
    Mat T;
    Mat M_r, C_r, K_r;
    Vec f_r;
    RowVec g_r;
};

inline TransformedModel transform_model(const ReducedModel& rm, const ReferenceBasis& rb,
                                        double cond_limit = 1e12) {
    Transformation tr = transformation(rm.V, rb, cond_limit);
    TransformedModel tm;
    tm.base = rm;
    tm.T = tr.T;
    tm.M_r = tr.T.transpose() * rm.M_r * tr.T;
    tm.C_r = tr.T.transpose() * rm.C_r * tr.T;
    tm.K_r = tr.T.transpose() * rm.K_r * tr.T;
    tm.f_r = tr.T.transpose() * rm.f_r;
    tm.g_r = rm.g_r * tr.T;
    return tm;
}

inline ReducedModel as_reduced(const TransformedModel& tm) {
    ReducedModel rm;
    rm.r = tm.M_r.rows();
    rm.M_r = tm.M_r;
    rm.C_r = tm.C_r;
    rm.K_r = tm.K_r;
    rm.f_r = tm.f_r;
    rm.g_r = tm.g_r;
    rm.p = tm.base.p;
    return rm;
}

/// Basis-truncation baseline: per basis count the angles vs R below 45 deg,
/// truncate every basis to the first l_min columns of V_k W_k.
struct TruncatedBases {
    std::vector<Mat> bases;
    Index l_min = 0;
    std::vector<Index> l_k;
    std::vector<Mat> W_trunc;  // the first l_min columns of each W_k
};

inline TruncatedBases amsallem_truncate(const std::vector<Mat>& bases,
                                        const ReferenceBasis& rb) {
    TruncatedBases out;
    std::vector<Mat> Ws;
    out.l_min = bases.empty() ? 0 : bases.front().cols();
    for (const auto& V : bases) {
        // W_k sits on the V_k side of the SVD, so compute angles as V_k vs R
        PrincipalAngles pk = principal_angles(V, rb.R);
        Index l = 0;
        for (Index i = 0; i < pk.theta.size(); ++i)
            if (pk.theta[i] < 45.0) ++l;
        out.l_k.push_back(l);
        out.l_min = std::min(out.l_min, l);
        Ws.push_back(pk.W);
    }
    if (out.l_min == 0)
        throw NumericError("degenerate truncation: no consistent direction exists (l_min = 0)");
    for (size_t k = 0; k < bases.size(); ++k) {
        Mat Vt = bases[k] * Ws[k].leftCols(out.l_min);
        // numerically a re-orthonormalization safeguard; V W is orthonormal in
        // exact arithmetic
        Eigen::HouseholderQR<Mat> qr(Vt);
        Mat Q = qr.householderQ() * Mat::Identity(Vt.rows(), Vt.cols());
        Mat Rf = qr.matrixQR().topRows(Vt.cols()).triangularView<Eigen::Upper>();
        for (Index j = 0; j < Vt.cols(); ++j)
            if (Rf(j, j) < 0.0) Q.col(j) = -Q.col(j);
        out.bases.push_back(Q);
        out.W_trunc.push_back(Ws[k].leftCols(out.l_min));
    }
    return out;
}

}  // namespace pmint
