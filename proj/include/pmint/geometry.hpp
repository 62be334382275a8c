#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "pmint/core.hpp"

namespace pmint {

/// Axis-aligned physical parameter box with affine [0,1]^d normalization.
struct ParamBox {
    Vec lower, upper;

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.size() != upper.size() || lower.size() == 0)
            throw ConfigError("param box: dimension mismatch");
        for (Index i = 0; i < lower.size(); ++i)
            if (!(lower[i] < upper[i]))
                throw ConfigError("param box: lower must be < upper componentwise");
    }

    Vec normalize(const Vec& p) const {
        if (p.size() != lower.size()) throw DomainError("normalize: dimension mismatch");
        Vec q(p.size());
        for (Index i = 0; i < p.size(); ++i) {
            q[i] = (p[i] - lower[i]) / (upper[i] - lower[i]);
            if (q[i] < -1e-12 || q[i] > 1.0 + 1e-12)
                throw DomainError("normalize: point outside box");
        }
        return q;
    }

    Vec denormalize(const Vec& q) const {
        if (q.size() != lower.size()) throw DomainError("denormalize: dimension mismatch");
        Vec p(q.size());
        for (Index i = 0; i < q.size(); ++i) {
            if (q[i] < -1e-12 || q[i] > 1.0 + 1e-12)
                throw DomainError("denormalize: point outside [0,1]");
            p[i] = lower[i] + q[i] * (upper[i] - lower[i]);
        }
        return p;
    }
};

struct Edge {
    int a, b;  // a < b
    bool operator<(const Edge& o) const { return a != o.a ? a < o.a : b < o.b; }
    bool operator==(const Edge& o) const { return a == o.a && b == o.b; }
};

inline Edge make_edge(int i, int j) { return i < j ? Edge{i, j} : Edge{j, i}; }

struct Triangulation {
    int d = 0;
    std::vector<Vec> points;                  // normalized coordinates
    std::vector<std::vector<int>> simplices;  // (d+1)-tuples of point ids
    std::vector<Edge> edges;                  // deduplicated, lexicographically sorted
};

namespace delaunay_detail {

inline double jitter_component(std::uint64_t idx, std::uint64_t axis, double scale) {
    // splitmix64 on (idx, axis); deterministic symbolic-style perturbation
    std::uint64_t z = idx * 0x9E3779B97F4A7C15ULL + axis * 0xBF58476D1CE4E5B9ULL + 1ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    double u = double(z >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
    return (2.0 * u - 1.0) * scale;
}

template <int D>
struct Simplex {
    std::array<int, D + 1> v;
    std::array<double, D> cc;  // circumcenter
    double r2 = 0.0;           // squared circumradius
    bool alive = true;
};

template <int D>
inline bool circumsphere(const std::vector<std::array<long double, D>>& pts,
                         const std::array<int, D + 1>& v, std::array<double, D>& cc,
                         double& r2) {
    // translate by the first vertex; solve 2 (p_i - p_0) . x = |p_i - p_0|^2
    Eigen::Matrix<long double, D, D> A;
    Eigen::Matrix<long double, D, 1> rhs;
    for (int i = 0; i < D; ++i) {
        long double nrm2 = 0.0L;
        for (int k = 0; k < D; ++k) {
            long double dk = pts[v[i + 1]][k] - pts[v[0]][k];
            A(i, k) = 2.0L * dk;
            nrm2 += dk * dk;
        }
        rhs[i] = nrm2;
    }
    Eigen::Matrix<long double, D, 1> x = A.fullPivLu().solve(rhs);
    long double rr = 0.0L;
    for (int k = 0; k < D; ++k) rr += x[k] * x[k];
    if (!std::isfinite((double)rr)) return false;
    for (int k = 0; k < D; ++k) cc[k] = (double)(x[k] + pts[v[0]][k]);
    r2 = (double)rr;
    return std::isfinite(r2) && r2 > 0.0;
}

template <int D>
inline bool in_circumsphere(const std::vector<std::array<long double, D>>& pts,
                            const Simplex<D>& s, int q) {
    long double d2 = 0.0L;
    for (int k = 0; k < D; ++k) {
        long double dk = pts[q][k] - (long double)s.cc[k];
        d2 += dk * dk;
    }
    long double gap = d2 - (long double)s.r2;
    long double band = 1e-12L * ((long double)s.r2 + d2 + 1.0L);
    if (gap > band) return false;
    if (gap < -band) return true;
    // borderline: recompute the circumsphere in long double around vertex 0
    Eigen::Matrix<long double, D, D> A;
    Eigen::Matrix<long double, D, 1> rhs;
    for (int i = 0; i < D; ++i) {
        long double nrm2 = 0.0L;
        for (int k = 0; k < D; ++k) {
            long double dk = pts[s.v[i + 1]][k] - pts[s.v[0]][k];
            A(i, k) = 2.0L * dk;
            nrm2 += dk * dk;
        }
        rhs[i] = nrm2;
    }
    Eigen::Matrix<long double, D, 1> x = A.fullPivLu().solve(rhs);
    long double rr = 0.0L, dd = 0.0L;
    for (int k = 0; k < D; ++k) {
        rr += x[k] * x[k];
        long double dk = pts[q][k] - (x[k] + pts[s.v[0]][k]);
        dd += dk * dk;
    }
    return dd < rr;
}

template <int D>
inline std::vector<std::vector<int>> bowyer_watson(const std::vector<Vec>& points,
                                                   double jitter_scale) {
    const int n = static_cast<int>(points.size());
    std::vector<std::array<long double, D>> pts;
    pts.reserve(n + D + 1);
    for (int i = 0; i < n; ++i) {
        std::array<long double, D> p;
        for (int k = 0; k < D; ++k)
            p[k] = (long double)points[i][k] +
                   (long double)jitter_component((std::uint64_t)i + 1, k, jitter_scale);
        pts.push_back(p);
    }
    // super simplex enclosing [-1, 2]^D comfortably
    std::array<int, D + 1> super;
    for (int i = 0; i <= D; ++i) {
        std::array<long double, D> p;
        for (int k = 0; k < D; ++k) p[k] = (i > 0 && k == i - 1) ? 500.0L : -100.0L;
        pts.push_back(p);
        super[i] = n + i;
    }

    std::vector<Simplex<D>> tris;
    {
        Simplex<D> s;
        s.v = super;
        if (!circumsphere<D>(pts, s.v, s.cc, s.r2))
            throw NumericError("delaunay: degenerate super simplex");
        tris.push_back(s);
    }

    using Face = std::array<int, D>;
    for (int q = 0; q < n; ++q) {
        std::map<Face, int> face_count;
        bool any_bad = false;
        for (auto& s : tris) {
            if (!s.alive) continue;
            if (in_circumsphere<D>(pts, s, q)) {
                any_bad = true;
                s.alive = false;
                for (int skip = 0; skip <= D; ++skip) {
                    Face f;
                    int c = 0;
                    for (int i = 0; i <= D; ++i)
                        if (i != skip) f[c++] = s.v[i];
                    std::sort(f.begin(), f.end());
                    face_count[f]++;
                }
            }
        }
        if (!any_bad) throw NumericError("delaunay: insertion point in no circumsphere");
        for (const auto& [f, cnt] : face_count) {
            if (cnt != 1) continue;
            Simplex<D> s;
            for (int k = 0; k < D; ++k) s.v[k] = f[k];
            s.v[D] = q;
            if (!circumsphere<D>(pts, s.v, s.cc, s.r2))
                throw NumericError("delaunay: degenerate cavity simplex");
            tris.push_back(s);
        }
        // compact occasionally
        if (tris.size() > 64 && tris.size() % 512 == 0) {
            std::vector<Simplex<D>> keep;
            keep.reserve(tris.size());
            for (auto& s : tris)
                if (s.alive) keep.push_back(s);
            tris.swap(keep);
        }
    }

    std::vector<std::vector<int>> out;
    for (const auto& s : tris) {
        if (!s.alive) continue;
        bool touches_super = false;
        for (int i = 0; i <= D; ++i)
            if (s.v[i] >= n) touches_super = true;
        if (touches_super) continue;
        std::vector<int> sv(s.v.begin(), s.v.end());
        std::sort(sv.begin(), sv.end());
        out.push_back(sv);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Brute-force Delaunay validity: no point strictly inside any circumsphere
/// (relative tolerance).
inline bool validate(const Triangulation& tri, double rel_tol = 1e-9) {
    if (tri.d == 1) return true;
    for (const auto& s : tri.simplices) {
        Vec a = tri.points[s[0]];
        Mat A(tri.d, tri.d);
        Vec rhs(tri.d);
        for (int i = 0; i < tri.d; ++i) {
            Vec di = tri.points[s[i + 1]] - a;
            A.row(i) = 2.0 * di.transpose();
            rhs[i] = di.squaredNorm();
        }
        Vec x = A.fullPivLu().solve(rhs);
        double r2 = x.squaredNorm();
        Vec cc = a + x;
        for (int q = 0; q < (int)tri.points.size(); ++q) {
            if (std::find(s.begin(), s.end(), q) != s.end()) continue;
            double d2 = (tri.points[q] - cc).squaredNorm();
            if (d2 < r2 * (1.0 - rel_tol) - 1e-300) return false;
        }
    }
    return true;
}

}  // namespace delaunay_detail

/// Delaunay triangulation of normalized points, d in {1, 2, 3}. Rebuilt from
/// scratch on every call; degeneracies are broken by a deterministic
/// perturbation applied to the predicates only.
inline Triangulation triangulate(const std::vector<Vec>& points) {
    if (points.empty()) throw DomainError("triangulate: no points");
    const int d = static_cast<int>(points.front().size());
    if (d < 1 || d > 3) throw DomainError("triangulate: only d in {1,2,3} supported");
    for (const auto& p : points)
        if ((int)p.size() != d) throw DomainError("triangulate: mixed dimensions");
    for (size_t i = 0; i < points.size(); ++i)
        for (size_t j = i + 1; j < points.size(); ++j)
            if ((points[i] - points[j]).norm() < 1e-12)
                throw DomainError("triangulate: duplicate points");

    Triangulation tri;
    tri.d = d;
    tri.points = points;

    if (d == 1) {
        if (points.size() < 2) throw DomainError("triangulate: need >= 2 points for d = 1");
        std::vector<int> order(points.size());
        for (size_t i = 0; i < points.size(); ++i) order[i] = (int)i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return points[a][0] < points[b][0]; });
        for (size_t i = 0; i + 1 < order.size(); ++i) {
            tri.simplices.push_back({std::min(order[i], order[i + 1]),
                                     std::max(order[i], order[i + 1])});
            tri.edges.push_back(make_edge(order[i], order[i + 1]));
        }
        std::sort(tri.edges.begin(), tri.edges.end());
        return tri;
    }

    if ((int)points.size() < d + 1)
        throw DomainError("triangulate: need at least d+1 points");

    for (double jit : {1e-12, 1e-10, 1e-8}) {
        try {
            tri.simplices = (d == 2)
                                ? delaunay_detail::bowyer_watson<2>(points, jit)
                                : delaunay_detail::bowyer_watson<3>(points, jit);
        } catch (const NumericError&) {
            continue;
        }
        // The perturbed predicates can emit zero-volume slivers when the input
        // has cospherical/coplanar symmetries (e.g. regular grids). They have
        // measure zero in the original coordinates, so dropping them keeps the
        // hull covered; keeping them would break point location and the
        // empty-circumsphere check, whose circumspheres are ill-defined.
        std::erase_if(tri.simplices, [&](const std::vector<int>& s) {
            Mat E(d, d);
            double scale = 0.0;
            for (int i = 0; i < d; ++i) {
                E.col(i) = points[s[i + 1]] - points[s[0]];
                scale = std::max(scale, E.col(i).norm());
            }
            double vol = std::abs(E.determinant());
            return vol <= 1e-10 * std::pow(scale, d);
        });
        if (tri.simplices.empty()) continue;
        // every point must appear in some simplex, else geometry is degenerate
        std::vector<char> used(points.size(), 0);
        for (const auto& s : tri.simplices)
            for (int v : s) used[v] = 1;
        bool all_used = std::all_of(used.begin(), used.end(), [](char c) { return c != 0; });
        Triangulation cand = tri;
        std::set<Edge> es;
        for (const auto& s : cand.simplices)
            for (size_t i = 0; i < s.size(); ++i)
                for (size_t j = i + 1; j < s.size(); ++j) es.insert(make_edge(s[i], s[j]));
        cand.edges.assign(es.begin(), es.end());
        if (all_used && delaunay_detail::validate(cand)) return cand;
    }
    throw DomainError("triangulate: degenerate geometry (affinely dependent points?)");
}

/// Euclidean edge lengths, aligned with tri.edges.
inline std::vector<double> edge_lengths(const Triangulation& tri) {
    std::vector<double> out;
    out.reserve(tri.edges.size());
    for (const auto& e : tri.edges)
        out.push_back((tri.points[e.a] - tri.points[e.b]).norm());
    return out;
}

/// Midpoint of edge (a, b) and its minimum distance to every other sample.
inline std::pair<Vec, double> midpoint_clearance(int a, int b,
                                                 const std::vector<Vec>& points) {
    if (a == b) throw DomainError("midpoint_clearance: a == b");
    Vec mid = 0.5 * (points[a] + points[b]);
    double clearance = std::numeric_limits<double>::max();
    for (int i = 0; i < (int)points.size(); ++i) {
        if (i == a || i == b) continue;
        clearance = std::min(clearance, (points[i] - mid).norm());
    }
    return {mid, clearance};
}

}  // namespace pmint
