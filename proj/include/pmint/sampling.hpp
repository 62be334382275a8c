#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmint/consistency.hpp"
#include "pmint/core.hpp"
#include "pmint/geometry.hpp"
#include "pmint/mor.hpp"

namespace pmint {

struct Hyperparams {
    double theta_lT = 10.0;  // deg, consistent below
    double theta_uT = 85.0;  // deg, inconsistent above
    double d_lT = 0.1;       // normalized distance, inconsistent below (angles saturate)
    double d_uT = 0.2;       // refinement target for inconsistent edges
    double d_N = 0.0;        // minimum clearance for new midpoints
    double d_C = 0.3;        // maximum gap between same-cluster samples
    int min_samples_per_cluster = 4;
    double angle_decrease_fraction = 0.10;
    int max_border_rounds = 3;
    int max_total_samples = 5000;
    // When true the distance-driven refinement bisects the longest inconsistent
    // edge (needed for termination); when false it bisects the longest unknown
    // edge instead.
    bool d_refine_inconsistent = true;

    void validate() const {
        if (!(0.0 <= theta_lT && theta_lT < theta_uT && theta_uT <= 90.0))
            throw ConfigError("hyperparams: need 0 <= theta_lT < theta_uT <= 90");
        if (!(0.0 <= d_lT && d_lT < d_uT)) throw ConfigError("hyperparams: need 0 <= d_lT < d_uT");
        if (!(d_N >= 0.0)) throw ConfigError("hyperparams: need d_N >= 0");
        if (!(d_C > 0.0)) throw ConfigError("hyperparams: need d_C > 0");
        if (min_samples_per_cluster < 1) throw ConfigError("hyperparams: need m >= 1");
        if (!(angle_decrease_fraction > 0.0 && angle_decrease_fraction < 1.0))
            throw ConfigError("hyperparams: angle_decrease_fraction in (0, 1)");
        if (max_border_rounds < 1) throw ConfigError("hyperparams: max_border_rounds >= 1");
        if (max_total_samples < 2) throw ConfigError("hyperparams: max_total_samples >= 2");
    }
};

/// Consistency flag of a sample pair from edge length and largest angle.
inline int get_consistency(double d, double theta_deg, const Hyperparams& hp) {
    if (theta_deg <= hp.theta_lT) return 1;
    if (theta_deg >= hp.theta_uT || d < hp.d_lT) return -1;
    return 0;
}

struct EdgeRecord {
    double d = 0.0;      // normalized length
    double theta = 0.0;  // largest principal angle [deg]
    int c = 0;           // -1 inconsistent, 0 unknown, +1 consistent
};

using RomEvaluator = std::function<ReducedModel(const Vec&)>;

struct SampleLibrary {
    ParamBox box;
    std::vector<Vec> points_phys;
    std::vector<Vec> points_norm;
    std::vector<ReducedModel> models;
    Triangulation tri;
    std::map<Edge, EdgeRecord> records;
    std::map<Edge, int> forced;  // pair-level overrides that survive retriangulation
    std::vector<int> labels;     // -1 before clustering
    std::set<int> deleted_clusters;
    std::vector<std::string> events;
    Hyperparams hp;
    bool converged = true;

    int size() const { return (int)points_norm.size(); }

    void log(const std::string& msg) { events.push_back(msg); }

    double pair_angle(int i, int j) {
        const Edge e = make_edge(i, j);
        auto it = angle_cache_.find(e);
        if (it != angle_cache_.end()) return it->second;
        const double a = largest_angle_deg(models[e.a].V, models[e.b].V);
        angle_cache_.emplace(e, a);
        return a;
    }

    /// Append a sample; the reduced model is computed exactly once here.
    int add_sample(const Vec& p_norm, const RomEvaluator& rom) {
        const Vec p_phys = box.denormalize(p_norm);
        points_norm.push_back(p_norm);
        points_phys.push_back(p_phys);
        models.push_back(rom(p_phys));
        labels.push_back(-1);
        const int id = size() - 1;
        std::ostringstream os;
        os << "rom_computed id=" << id << " p=";
        for (Index k = 0; k < p_phys.size(); ++k) os << (k ? "," : "") << p_phys[k];
        log(os.str());
        return id;
    }

    /// Rebuild the triangulation and refresh every edge record.
    void refresh() {
        tri = triangulate(points_norm);
        std::map<Edge, EdgeRecord> next;
        for (const auto& e : tri.edges) {
            EdgeRecord r;
            r.d = (points_norm[e.a] - points_norm[e.b]).norm();
            r.theta = pair_angle(e.a, e.b);
            auto it = forced.find(e);
            r.c = it != forced.end() ? it->second : get_consistency(r.d, r.theta, hp);
            next.emplace(e, r);
        }
        records.swap(next);
    }

    double min_distance(const Vec& p) const {
        double best = std::numeric_limits<double>::max();
        for (const auto& q : points_norm) best = std::min(best, (q - p).norm());
        return best;
    }

  private:
    std::map<Edge, double> angle_cache_;
};

namespace sampling_detail {

/// Candidate edge for bisection: best score first, ties by lexicographic ids.
inline std::optional<Edge> pick_edge(const SampleLibrary& lib, int want_c, bool by_angle,
                                     double min_d, double clearance) {
    std::vector<std::pair<double, Edge>> cands;
    for (const auto& [e, r] : lib.records)
        if (r.c == want_c && r.d > min_d) cands.push_back({by_angle ? r.theta : r.d, e});
    std::sort(cands.begin(), cands.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    for (const auto& [score, e] : cands) {
        auto [mid, clr] = midpoint_clearance(e.a, e.b, lib.points_norm);
        if (clr > clearance && lib.min_distance(mid) > 0.0) return e;
    }
    return std::nullopt;
}

inline bool spans_space(const std::vector<Vec>& pts, int d) {
    if ((int)pts.size() < d + 1) return false;
    Mat D(pts.size() - 1, d);
    for (size_t i = 1; i < pts.size(); ++i) D.row((Index)i - 1) = (pts[i] - pts[0]).transpose();
    Eigen::JacobiSVD<Mat> svd(D);
    return svd.rank() >= d ||
           (svd.singularValues().size() >= d && svd.singularValues()(d - 1) > 1e-9);
}

}  // namespace sampling_detail

/// Adaptive sampling: bisect edges until every pair is classified consistent or
/// inconsistent and no inconsistent edge is longer than d_uT.
inline SampleLibrary adaptive_sample(const RomEvaluator& rom, const ParamBox& box,
                                     const std::vector<Vec>& initial_points_phys,
                                     const Hyperparams& hp) {
    hp.validate();
    if (initial_points_phys.size() < 2)
        throw ConfigError("adaptive_sample: need at least 2 initial points");
    SampleLibrary lib;
    lib.box = box;
    lib.hp = hp;
    for (const auto& p : initial_points_phys) {
        const Vec pn = box.normalize(p);
        if (lib.size() > 0 && lib.min_distance(pn) == 0.0)
            throw ConfigError("adaptive_sample: duplicate initial point");
        lib.add_sample(pn, rom);
    }
    lib.refresh();

    while (true) {
        bool any_unknown = false, any_long_inc = false;
        for (const auto& [e, r] : lib.records) {
            any_unknown |= r.c == 0;
            any_long_inc |= r.c == -1 && r.d > hp.d_uT;
        }
        if (!any_unknown && !any_long_inc) break;
        if (lib.size() >= hp.max_total_samples) {
            lib.converged = false;
            lib.log("budget_exhausted");
            break;
        }

        bool added = false;
        std::optional<Edge> parent;
        double parent_theta = 0.0;
        int theta_sample = -1;
        if (any_unknown) {
            if (auto e = sampling_detail::pick_edge(lib, 0, true, 0.0, hp.d_N)) {
                parent = *e;
                parent_theta = lib.records.at(*e).theta;
                const Vec mid = 0.5 * (lib.points_norm[e->a] + lib.points_norm[e->b]);
                theta_sample = lib.add_sample(mid, rom);
                added = true;
            }
        }
        if (any_long_inc || (!hp.d_refine_inconsistent && any_unknown)) {
            const int target = hp.d_refine_inconsistent ? -1 : 0;
            const double min_d = hp.d_refine_inconsistent ? hp.d_uT : 0.0;
            if (auto e = sampling_detail::pick_edge(lib, target, false, min_d, hp.d_N)) {
                const Vec mid = 0.5 * (lib.points_norm[e->a] + lib.points_norm[e->b]);
                if (lib.min_distance(mid) > hp.d_N) {
                    lib.add_sample(mid, rom);
                    added = true;
                }
            }
        }

        if (!added) {
            // blocked: pairs whose midpoint cannot be placed get tagged
            // inconsistent so the loop can make progress
            bool forced_any = false;
            for (const auto& [e, r] : lib.records) {
                if (r.c != 0) continue;
                auto [mid, clr] = midpoint_clearance(e.a, e.b, lib.points_norm);
                if (!(clr > hp.d_N) || lib.min_distance(mid) == 0.0) {
                    lib.forced[e] = -1;
                    forced_any = true;
                    std::ostringstream os;
                    os << "forced_inconsistent blocked edge=" << e.a << "-" << e.b;
                    lib.log(os.str());
                }
            }
            if (!forced_any) {
                lib.log("stalled: remaining edges cannot be refined");
                break;
            }
            lib.refresh();
            continue;
        }

        lib.refresh();
        if (theta_sample >= 0) {
            // angle-decrease rule: if bisection barely lowered the largest
            // angle, both halves of the parent edge are inconsistent
            const double ta = lib.pair_angle(parent->a, theta_sample);
            const double tb = lib.pair_angle(theta_sample, parent->b);
            if (std::max(ta, tb) > (1.0 - hp.angle_decrease_fraction) * parent_theta) {
                const Edge ea = make_edge(parent->a, theta_sample);
                const Edge eb = make_edge(theta_sample, parent->b);
                lib.forced[ea] = -1;
                lib.forced[eb] = -1;
                std::ostringstream os;
                os << "forced_inconsistent angle_rule parent=" << parent->a << "-" << parent->b;
                lib.log(os.str());
                lib.refresh();
            }
        }
    }
    return lib;
}

/// Connected components of the consistent-edge graph; labels are dense,
/// ordered by the smallest sample id in each component.
inline void cluster(SampleLibrary& lib) {
    const int K = lib.size();
    std::vector<int> parent(K);
    for (int i = 0; i < K; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [e, r] : lib.records)
        if (r.c == 1) parent[find(e.a)] = find(e.b);
    lib.labels.assign(K, -1);
    int next = 0;
    std::map<int, int> root_label;
    for (int i = 0; i < K; ++i) {
        const int rt = find(i);
        auto it = root_label.find(rt);
        if (it == root_label.end()) it = root_label.emplace(rt, next++).first;
        lib.labels[i] = it->second;
    }
}

inline std::vector<int> cluster_members(const SampleLibrary& lib, int cid) {
    std::vector<int> out;
    for (int i = 0; i < lib.size(); ++i)
        if (lib.labels[i] == cid) out.push_back(i);
    return out;
}

namespace sampling_detail {

/// Largest-distance pair inside a cluster, taken from the cluster's own
/// triangulation when possible and from all pairs otherwise.
inline std::pair<int, int> largest_gap_pair(const SampleLibrary& lib,
                                            const std::vector<int>& members) {
    const int d = lib.box.dim();
    std::vector<Edge> pairs;
    if ((int)members.size() >= d + 2) {
        try {
            std::vector<Vec> pts;
            for (int id : members) pts.push_back(lib.points_norm[id]);
            const Triangulation t = triangulate(pts);
            for (const auto& e : t.edges) pairs.push_back(make_edge(members[e.a], members[e.b]));
        } catch (const DomainError&) {
            pairs.clear();
        }
    }
    if (pairs.empty())
        for (size_t i = 0; i < members.size(); ++i)
            for (size_t j = i + 1; j < members.size(); ++j)
                pairs.push_back(make_edge(members[i], members[j]));
    Edge best{-1, -1};
    double best_d = -1.0;
    for (const auto& e : pairs) {
        const double dd = (lib.points_norm[e.a] - lib.points_norm[e.b]).norm();
        if (dd > best_d + 1e-15 || (std::abs(dd - best_d) <= 1e-15 && e < best)) {
            best = e;
            best_d = dd;
        }
    }
    return {best.a, best.b};
}

}  // namespace sampling_detail

/// Grow a cluster to the minimum sample count by bisecting its largest gap.
inline std::vector<int> fill_region(SampleLibrary& lib, int cid, const RomEvaluator& rom) {
    std::vector<int> added;
    while ((int)cluster_members(lib, cid).size() < lib.hp.min_samples_per_cluster) {
        const auto members = cluster_members(lib, cid);
        if (members.size() < 2) throw DomainError("fill_region: cluster cannot span the box");
        auto [a, b] = sampling_detail::largest_gap_pair(lib, members);
        const Vec mid = 0.5 * (lib.points_norm[a] + lib.points_norm[b]);
        if (lib.min_distance(mid) == 0.0) {
            lib.log("fill_region: midpoint already sampled, stopping");
            break;
        }
        const int id = lib.add_sample(mid, rom);
        lib.labels[id] = cid;
        added.push_back(id);
    }
    return added;
}

/// Probe the surroundings of an under-determined cluster by bisecting edges to
/// samples of other classes; the cluster is deleted if it still cannot span
/// the parameter space afterwards.
inline std::vector<int> find_borders(SampleLibrary& lib, int cid, const RomEvaluator& rom) {
    std::vector<int> added;
    auto done = [&]() {
        std::vector<Vec> pts;
        for (int id : cluster_members(lib, cid)) pts.push_back(lib.points_norm[id]);
        return sampling_detail::spans_space(pts, lib.box.dim());
    };
    for (int round = 0; round < lib.hp.max_border_rounds && !done(); ++round) {
        lib.refresh();
        std::vector<std::pair<int, int>> pairs;
        for (const auto& e : lib.tri.edges) {
            if (lib.labels[e.a] == cid && lib.labels[e.b] != cid) pairs.push_back({e.a, e.b});
            if (lib.labels[e.b] == cid && lib.labels[e.a] != cid) pairs.push_back({e.b, e.a});
        }
        std::sort(pairs.begin(), pairs.end());
        for (const auto& [i, j] : pairs) {
            const Vec mid = 0.5 * (lib.points_norm[i] + lib.points_norm[j]);
            if (lib.min_distance(mid) == 0.0) continue;
            const int id = lib.add_sample(mid, rom);
            lib.refresh();
            // classify by smallest largest-angle to labeled triangulation neighbors
            int best = -1;
            double best_theta = std::numeric_limits<double>::max();
            for (const auto& e : lib.tri.edges) {
                const int nb = e.a == id ? e.b : (e.b == id ? e.a : -1);
                if (nb < 0 || lib.labels[nb] < 0) continue;
                const double th = lib.pair_angle(id, nb);
                if (th < best_theta - 1e-12 || (std::abs(th - best_theta) <= 1e-12 && nb < best)) {
                    best_theta = th;
                    best = nb;
                }
            }
            if (best < 0) throw NumericError("find_borders: new sample has no labeled neighbor");
            lib.labels[id] = lib.labels[best];
            added.push_back(id);
            std::ostringstream os;
            os << "border_sample id=" << id << " class=" << lib.labels[id];
            lib.log(os.str());
        }
    }
    if (!done()) {
        lib.deleted_clusters.insert(cid);
        std::ostringstream os;
        os << "cluster_deleted id=" << cid;
        lib.log(os.str());
    }
    return added;
}

/// Bisect every same-cluster edge longer than d_C until none remains.
inline std::vector<int> fill_long_consistent_edges(SampleLibrary& lib, const RomEvaluator& rom) {
    std::vector<int> added;
    while (true) {
        lib.refresh();
        std::vector<Edge> longs;
        for (const auto& e : lib.tri.edges) {
            const int la = lib.labels[e.a];
            if (la < 0 || la != lib.labels[e.b] || lib.deleted_clusters.count(la)) continue;
            if ((lib.points_norm[e.a] - lib.points_norm[e.b]).norm() > lib.hp.d_C)
                longs.push_back(e);
        }
        if (longs.empty()) break;
        std::sort(longs.begin(), longs.end());
        bool any = false;
        for (const auto& e : longs) {
            const Vec mid = 0.5 * (lib.points_norm[e.a] + lib.points_norm[e.b]);
            if (lib.min_distance(mid) == 0.0) continue;
            const int id = lib.add_sample(mid, rom);
            lib.labels[id] = lib.labels[e.a];
            added.push_back(id);
            any = true;
        }
        if (!any) {
            lib.log("fill_long_consistent_edges: remaining long edges not refinable");
            break;
        }
    }
    return added;
}

/// Full post-sampling treatment: clustering, border probing for degenerate
/// clusters, region filling, and long-edge gap filling.
inline void finalize_regions(SampleLibrary& lib, const RomEvaluator& rom) {
    cluster(lib);
    int n_labels = 0;
    for (int l : lib.labels) n_labels = std::max(n_labels, l + 1);
    for (int cid = 0; cid < n_labels; ++cid) {
        const auto members = cluster_members(lib, cid);
        if ((int)members.size() >= lib.hp.min_samples_per_cluster) continue;
        std::vector<Vec> pts;
        for (int id : members) pts.push_back(lib.points_norm[id]);
        if (!sampling_detail::spans_space(pts, lib.box.dim())) find_borders(lib, cid, rom);
        if (!lib.deleted_clusters.count(cid)) fill_region(lib, cid, rom);
    }
    fill_long_consistent_edges(lib, rom);
    lib.refresh();
}

}  // namespace pmint
