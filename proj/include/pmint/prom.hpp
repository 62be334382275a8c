#pragma once

#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pmint/consistency.hpp"
#include "pmint/interp.hpp"
#include "pmint/sampling.hpp"

namespace pmint {

enum class InterpKind { spline1d, ridge };

inline InterpKind interp_kind_from_string(const std::string& s) {
    if (s == "spline1d") return InterpKind::spline1d;
    if (s == "ridge") return InterpKind::ridge;
    throw ConfigError("unknown interpolant kind: " + s);
}

inline std::string to_string(InterpKind k) {
    return k == InterpKind::spline1d ? "spline1d" : "ridge";
}

namespace prom_detail {

// packed layout: upper triangles (column-major) of M, C, K, then f, then g
inline Index packed_size(Index r) { return 3 * r * (r + 1) / 2 + 2 * r; }

inline Vec pack_model(const Mat& M, const Mat& C, const Mat& K, const Vec& f, const RowVec& g) {
    const Index r = M.rows();
    Vec v(packed_size(r));
    Index k = 0;
    for (const Mat* A : {&M, &C, &K})
        for (Index j = 0; j < r; ++j)
            for (Index i = 0; i <= j; ++i) v[k++] = (*A)(i, j);
    for (Index i = 0; i < r; ++i) v[k++] = f[i];
    for (Index i = 0; i < r; ++i) v[k++] = g[i];
    return v;
}

inline void unpack_model(const Vec& v, Index r, Mat& M, Mat& C, Mat& K, Vec& f, RowVec& g) {
    Index k = 0;
    for (Mat* A : {&M, &C, &K}) {
        A->resize(r, r);
        for (Index j = 0; j < r; ++j)
            for (Index i = 0; i <= j; ++i) {
                (*A)(i, j) = v[k];
                (*A)(j, i) = v[k];
                ++k;
            }
    }
    f.resize(r);
    for (Index i = 0; i < r; ++i) f[i] = v[k++];
    g.resize(r);
    for (Index i = 0; i < r; ++i) g[i] = v[k++];
}

}  // namespace prom_detail

struct Prediction {
    ReducedModel rm;  // expressed in transformed coordinates; V is empty
    bool spd_warning = false;
    int cluster_id = -1;
};

/// Per-cluster interpolated reduced-order model in reference coordinates.
struct LocalProm {
    int cluster_id = -1;
    InterpKind kind = InterpKind::spline1d;
    Index r = 0;
    ReferenceBasis R;
    std::vector<int> member_ids;
    Mat train_points;  // K x d, normalized; ascending for spline1d
    Mat train_values;  // K x packed_size(r)

    std::shared_ptr<SplineFamily> spline;
    Mat spline_m;  // second derivatives, K x packed_size(r)
    std::shared_ptr<RidgeFamily> ridge;
    Mat beta;  // n_features x packed_size(r)

    void fit(double lambda = 1e-5) {
        if (kind == InterpKind::spline1d) {
            if (train_points.cols() != 1)
                throw ConfigError("spline1d interpolant requires a 1D parameter space");
            if (train_points.rows() < 2)
                throw ConfigError("spline1d interpolant needs >= 2 training points");
            spline = std::make_shared<SplineFamily>(train_points.col(0));
            spline_m.resize(train_points.rows(), train_values.cols());
            for (Index j = 0; j < train_values.cols(); ++j)
                spline_m.col(j) = spline->fit(train_values.col(j));
        } else {
            ridge = std::make_shared<RidgeFamily>(train_points, 3, lambda);
            beta.resize(ridge->n_features(), train_values.cols());
            for (Index j = 0; j < train_values.cols(); ++j)
                beta.col(j) = ridge->fit(train_values.col(j));
        }
    }

    Prediction evaluate(const Vec& p_norm) const {
        Vec v(train_values.cols());
        if (kind == InterpKind::spline1d) {
            for (Index j = 0; j < v.size(); ++j)
                v[j] = spline->eval(train_values.col(j), spline_m.col(j), p_norm[0]);
        } else {
            const Vec phi = ridge->features(p_norm);
            v = (phi.transpose() * beta).transpose();
        }
        Prediction out;
        out.cluster_id = cluster_id;
        out.rm.r = r;
        out.rm.p = p_norm;
        prom_detail::unpack_model(v, r, out.rm.M_r, out.rm.C_r, out.rm.K_r, out.rm.f_r,
                                  out.rm.g_r);
        Eigen::LLT<Mat> llt(out.rm.M_r);
        out.spd_warning = llt.info() != Eigen::Success;
        return out;
    }
};

/// Build the per-cluster reference basis, transform every member's operators
/// into its coordinates, and fit entrywise interpolants.
inline LocalProm train_local_prom(const SampleLibrary& lib, int cid, InterpKind kind,
                                  double lambda = 1e-5,
                                  double cond_limit = 1e12) {
    LocalProm lp;
    lp.cluster_id = cid;
    lp.kind = kind;
    lp.member_ids = cluster_members(lib, cid);
    if (lp.member_ids.empty()) throw DomainError("train_local_prom: empty cluster");
    lp.r = lib.models[lp.member_ids.front()].r;
    std::vector<Mat> bases;
    for (int id : lp.member_ids) bases.push_back(lib.models[id].V);
    lp.R = reference_basis(bases, lp.member_ids);
    const int d = lib.box.dim();
    if (kind == InterpKind::spline1d) {
        std::sort(lp.member_ids.begin(), lp.member_ids.end(), [&](int a, int b) {
            return lib.points_norm[a][0] < lib.points_norm[b][0];
        });
    }
    lp.train_points.resize((Index)lp.member_ids.size(), d);
    lp.train_values.resize((Index)lp.member_ids.size(), prom_detail::packed_size(lp.r));
    for (size_t k = 0; k < lp.member_ids.size(); ++k) {
        const int id = lp.member_ids[k];
        lp.train_points.row((Index)k) = lib.points_norm[id].transpose();
        try {
            const TransformedModel tm = transform_model(lib.models[id], lp.R, cond_limit);
            lp.train_values.row((Index)k) =
                prom_detail::pack_model(tm.M_r, tm.C_r, tm.K_r, tm.f_r, tm.g_r).transpose();
        } catch (const NumericError& e) {
            throw NumericError("cluster " + std::to_string(cid) + ", sample " +
                               std::to_string(id) + ": " + e.what());
        }
    }
    lp.fit(lambda);
    return lp;
}

struct PromSet {
    ParamBox box;
    int k = 1;  // neighbor count for classification
    Mat cls_points;
    std::vector<int> cls_labels;
    std::vector<int> cls_sample_ids;
    std::vector<LocalProm> proms;
    std::map<int, int> prom_of_cluster;

    const LocalProm& prom_for(int cid) const {
        auto it = prom_of_cluster.find(cid);
        if (it == prom_of_cluster.end())
            throw DomainError("no trained model for cluster " + std::to_string(cid));
        return proms[it->second];
    }
};

/// Train one LocalProm per non-deleted cluster and assemble the classifier
/// over their members.
inline PromSet train_prom_set(const SampleLibrary& lib, InterpKind kind, int k = 1,
                              double lambda = 1e-5) {
    PromSet set;
    set.box = lib.box;
    set.k = k;
    std::vector<int> ids;
    for (int i = 0; i < lib.size(); ++i) {
        const int l = lib.labels[i];
        if (l < 0) throw DomainError("train_prom_set: run clustering first");
        if (lib.deleted_clusters.count(l)) continue;
        ids.push_back(i);
    }
    if (ids.empty()) throw DomainError("train_prom_set: no usable clusters");
    set.cls_points.resize((Index)ids.size(), lib.box.dim());
    for (size_t t = 0; t < ids.size(); ++t) {
        set.cls_points.row((Index)t) = lib.points_norm[ids[t]].transpose();
        set.cls_labels.push_back(lib.labels[ids[t]]);
        set.cls_sample_ids.push_back(ids[t]);
    }
    std::set<int> cids(set.cls_labels.begin(), set.cls_labels.end());
    for (int cid : cids) {
        set.prom_of_cluster[cid] = (int)set.proms.size();
        set.proms.push_back(train_local_prom(lib, cid, kind, lambda));
    }
    return set;
}

/// k-nearest-neighbor class prediction with deterministic tie rules: distance
/// ties prefer the lowest sample id, vote ties the nearest member's label.
inline int classify(const PromSet& set, const Vec& p_norm) {
    const Index N = set.cls_points.rows();
    std::vector<std::pair<double, int>> order;  // (distance, position)
    order.reserve(N);
    for (Index i = 0; i < N; ++i)
        order.push_back({(set.cls_points.row(i).transpose() - p_norm).norm(), (int)i});
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return set.cls_sample_ids[a.second] < set.cls_sample_ids[b.second];
    });
    const int k = std::min<int>(set.k, (int)N);
    std::map<int, int> votes;
    for (int t = 0; t < k; ++t) votes[set.cls_labels[order[t].second]]++;
    int best = -1, best_votes = -1;
    for (int t = 0; t < k; ++t) {
        const int l = set.cls_labels[order[t].second];
        if (votes[l] > best_votes) {
            best = l;
            best_votes = votes[l];
        }
    }
    return best;
}

/// Interpolated reduced model at a query point via its classified cluster.
inline Prediction predict(const PromSet& set, const Vec& p_norm) {
    for (Index i = 0; i < p_norm.size(); ++i)
        if (p_norm[i] < -1e-9 || p_norm[i] > 1.0 + 1e-9)
            throw DomainError("predict: point outside the parameter box");
    const int cid = classify(set, p_norm);
    return set.prom_for(cid).evaluate(p_norm);
}

namespace prom_detail {

/// Simplex containing p (barycentric test); falls back to the nearest simplex
/// by centroid distance when p lies outside the hull.
inline std::pair<int, bool> locate_simplex(const Triangulation& tri, const Vec& p) {
    const int d = tri.d;
    int nearest = -1;
    double nearest_dist = std::numeric_limits<double>::max();
    for (size_t s = 0; s < tri.simplices.size(); ++s) {
        const auto& sx = tri.simplices[s];
        Mat A(d, d);
        for (int j = 0; j < d; ++j) A.col(j) = tri.points[sx[j + 1]] - tri.points[sx[0]];
        const Vec lam = A.fullPivLu().solve(p - tri.points[sx[0]]);
        bool inside = lam.minCoeff() > -1e-9 && lam.sum() < 1.0 + 1e-9;
        if (inside) return {(int)s, false};
        Vec c = Vec::Zero(p.size());
        for (int v : sx) c += tri.points[v];
        c /= (double)sx.size();
        const double dist = (c - p).norm();
        if (dist < nearest_dist) {
            nearest_dist = dist;
            nearest = (int)s;
        }
    }
    if (nearest < 0) throw DomainError("locate_simplex: empty triangulation");
    return {nearest, true};
}

}  // namespace prom_detail

struct IndicatorResult {
    int count = 0;           // inconsistent reference directions across the border
    bool extrapolated = false;
    std::vector<int> clusters;  // distinct cluster ids at the located simplex
};

/// Number of reference-basis principal angles above theta_lT between the
/// clusters meeting at the simplex containing p; 0 inside a single cluster.
inline IndicatorResult inconsistency_indicator(const PromSet& set, const SampleLibrary& lib,
                                               const Vec& p_norm) {
    IndicatorResult out;
    auto [s, extrap] = prom_detail::locate_simplex(lib.tri, p_norm);
    out.extrapolated = extrap;
    std::set<int> cids;
    for (int v : lib.tri.simplices[s]) {
        const int l = lib.labels[v];
        if (l >= 0 && set.prom_of_cluster.count(l)) cids.insert(l);
    }
    out.clusters.assign(cids.begin(), cids.end());
    for (size_t i = 0; i < out.clusters.size(); ++i)
        for (size_t j = i + 1; j < out.clusters.size(); ++j) {
            const Mat& Ri = set.prom_for(out.clusters[i]).R.R;
            const Mat& Rj = set.prom_for(out.clusters[j]).R.R;
            const PrincipalAngles pa = principal_angles(Ri, Rj);
            int cnt = 0;
            for (Index l = 0; l < pa.theta.size(); ++l)
                if (pa.theta[l] > lib.hp.theta_lT) ++cnt;
            out.count = std::max(out.count, cnt);
        }
    return out;
}

/// Remedy for border points: project an already-assembled FOM onto the
/// orthonormalized union of the containing simplex's sample bases.
inline ReducedModel global_basis_reduce(const SystemMatrices& sys, const SampleLibrary& lib,
                                        const Vec& p_norm) {
    auto [s, extrap] = prom_detail::locate_simplex(lib.tri, p_norm);
    (void)extrap;
    const auto& sx = lib.tri.simplices[s];
    const Index n = lib.models[sx[0]].V.rows();
    Index cols = 0;
    for (int v : sx) cols += lib.models[v].V.cols();
    Mat concat(n, cols);
    Index c = 0;
    for (int v : sx) {
        concat.middleCols(c, lib.models[v].V.cols()) = lib.models[v].V;
        c += lib.models[v].V.cols();
    }
    Eigen::BDCSVD<Mat> svd(concat, Eigen::ComputeThinU);
    const Vec sv = svd.singularValues();
    Index rank = 0;
    while (rank < sv.size() && sv[rank] > 1e-10 * sv[0]) ++rank;
    const Mat U = svd.matrixU().leftCols(rank);
    ReducedModel rm = reduce(sys, U);
    rm.p = lib.box.denormalize(p_norm);
    return rm;
}

inline ReducedModel global_basis_predict(const std::function<SystemMatrices(const Vec&)>& fom,
                                         const SampleLibrary& lib, const Vec& p_norm) {
    return global_basis_reduce(fom(lib.box.denormalize(p_norm)), lib, p_norm);
}

/// Original matrix interpolation: one global reference basis over every
/// sample, singularity guard relaxed so the failure mode is reproduced
/// instead of raised.
inline LocalProm baseline_matrix_interp_train(const SampleLibrary& lib, InterpKind kind,
                                              double lambda = 1e-5) {
    SampleLibrary flat = lib;
    flat.labels.assign(flat.size(), 0);
    flat.deleted_clusters.clear();
    return train_local_prom(flat, 0, kind, lambda,
                            std::numeric_limits<double>::infinity());
}

/// Basis-truncation baseline: truncate all bases to their consistent
/// directions w.r.t. the global reference basis, re-project the sampled
/// operators, then interpolate globally.
inline LocalProm baseline_amsallem_train(const SampleLibrary& lib, InterpKind kind,
                                         double lambda = 1e-5) {
    std::vector<Mat> bases;
    for (const auto& m : lib.models) bases.push_back(m.V);
    const ReferenceBasis rb = reference_basis(bases);
    const TruncatedBases tb = amsallem_truncate(bases, rb);
    SampleLibrary trunc = lib;
    trunc.labels.assign(trunc.size(), 0);
    trunc.deleted_clusters.clear();
    for (int i = 0; i < trunc.size(); ++i) {
        const Mat& W = tb.W_trunc[i];  // r x l_min, orthonormal columns
        ReducedModel& rm = trunc.models[i];
        rm.V = tb.bases[i];
        rm.M_r = W.transpose() * lib.models[i].M_r * W;
        rm.C_r = W.transpose() * lib.models[i].C_r * W;
        rm.K_r = W.transpose() * lib.models[i].K_r * W;
        rm.f_r = W.transpose() * lib.models[i].f_r;
        rm.g_r = lib.models[i].g_r * W;
        rm.r = tb.l_min;
    }
    return train_local_prom(trunc, 0, kind, lambda,
                            std::numeric_limits<double>::infinity());
}

}  // namespace pmint
