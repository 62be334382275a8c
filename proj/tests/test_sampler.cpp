#include <catch2/catch_amalgamated.hpp>

#include <queue>
#include <random>

#include "pmint/sampling.hpp"

using namespace pmint;

namespace {

ReducedModel make_rm(const Mat& V, const Vec& p) {
    ReducedModel rm;
    rm.V = V;
    rm.r = V.cols();
    rm.M_r = Mat::Identity(rm.r, rm.r);
    rm.C_r = 0.01 * Mat::Identity(rm.r, rm.r);
    rm.K_r = Mat::Identity(rm.r, rm.r);
    rm.f_r = Vec::Ones(rm.r);
    rm.g_r = RowVec::Ones(rm.r);
    rm.p = p;
    return rm;
}

Mat span_cols(int n, std::initializer_list<int> cols) {
    Mat V = Mat::Zero(n, (Index)cols.size());
    Index j = 0;
    for (int c : cols) V(c, j++) = 1.0;
    return V;
}

// piecewise-constant subspace family on [0, 1]: the basis jumps at 0.5
RomEvaluator step_family() {
    return [](const Vec& p) {
        const Mat V = p[0] < 0.5 ? span_cols(8, {0, 1}) : span_cols(8, {2, 3});
        return make_rm(V, p);
    };
}

RomEvaluator constant_family() {
    return [](const Vec& p) { return make_rm(span_cols(8, {0, 1}), p); };
}

// a fresh pseudo-random subspace at every distinct parameter value
RomEvaluator random_family() {
    return [](const Vec& p) {
        uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (Index k = 0; k < p.size(); ++k) {
            const auto q = (uint64_t)llround(p[k] * 281474976710656.0);
            h = (h ^ q) * 0x2545F4914F6CDD1DULL;
        }
        std::mt19937_64 rng(h);
        std::normal_distribution<double> g(0.0, 1.0);
        Mat A(16, 2);
        for (Index i = 0; i < A.size(); ++i) A(i / 2, i % 2) = g(rng);
        Eigen::HouseholderQR<Mat> qr(A);
        return make_rm(Mat(qr.householderQ() * Mat::Identity(16, 2)), p);
    };
}

ParamBox unit_box(int d) {
    ParamBox b;
    b.lower = Vec::Zero(d);
    b.upper = Vec::Ones(d);
    return b;
}

std::vector<Vec> pts1d(std::initializer_list<double> xs) {
    std::vector<Vec> out;
    for (double x : xs) {
        Vec p(1);
        p << x;
        out.push_back(p);
    }
    return out;
}

int count_events(const SampleLibrary& lib, const std::string& prefix) {
    int n = 0;
    for (const auto& e : lib.events)
        if (e.rfind(prefix, 0) == 0) ++n;
    return n;
}

}  // namespace

TEST_CASE("consistency rule branch table") {
    Hyperparams hp;  // theta_lT=10, theta_uT=85, d_lT=0.1
    REQUIRE(get_consistency(0.5, 5.0, hp) == 1);
    REQUIRE(get_consistency(0.5, 87.0, hp) == -1);
    REQUIRE(get_consistency(0.05, 40.0, hp) == -1);
    REQUIRE(get_consistency(0.15, 40.0, hp) == 0);
    REQUIRE(get_consistency(0.05, 5.0, hp) == 1);  // angle threshold wins first
    REQUIRE(get_consistency(0.15, 10.0, hp) == 1);
    REQUIRE(get_consistency(0.15, 85.0, hp) == -1);
}

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    REQUIRE_NOTHROW(hp.validate());
    hp.d_lT = 0.3;  // above d_uT
    REQUIRE_THROWS_AS(hp.validate(), ConfigError);
    hp = Hyperparams{};
    hp.min_samples_per_cluster = 0;
    REQUIRE_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("consistent initial pair terminates immediately") {
    Hyperparams hp;
    auto lib = adaptive_sample(constant_family(), unit_box(1), pts1d({0.0, 1.0}), hp);
    REQUIRE(lib.size() == 2);
    REQUIRE(lib.records.size() == 1);
    REQUIRE(lib.records.begin()->second.c == 1);
    REQUIRE(lib.converged);
}

TEST_CASE("step family localizes the subspace jump") {
    Hyperparams hp;
    auto lib = adaptive_sample(step_family(), unit_box(1), pts1d({0.0, 1.0}), hp);
    REQUIRE(lib.converged);
    // exactly one inconsistent edge remains and it brackets 0.5 within d_uT
    int n_inc = 0;
    for (const auto& [e, r] : lib.records) {
        REQUIRE(r.c != 0);
        if (r.c == -1) {
            ++n_inc;
            const double lo = std::min(lib.points_norm[e.a][0], lib.points_norm[e.b][0]);
            const double hi = std::max(lib.points_norm[e.a][0], lib.points_norm[e.b][0]);
            REQUIRE(lo < 0.5);
            REQUIRE(hi >= 0.5);
            REQUIRE(hi - lo <= hp.d_uT + 1e-12);
        }
    }
    REQUIRE(n_inc == 1);
    cluster(lib);
    std::set<int> labels(lib.labels.begin(), lib.labels.end());
    REQUIRE(labels.size() == 2);
    // every reduced model computed exactly once
    REQUIRE(count_events(lib, "rom_computed") == lib.size());
}

TEST_CASE("angle-decrease rule tags non-improving bisections inconsistent") {
    Hyperparams hp;
    auto lib = adaptive_sample(random_family(), unit_box(1), pts1d({0.0, 1.0}), hp);
    REQUIRE(count_events(lib, "forced_inconsistent angle_rule") > 0);
    for (const auto& [e, r] : lib.records) REQUIRE(r.c == -1);
    cluster(lib);
    // with every pair inconsistent each sample is its own class
    std::set<int> labels(lib.labels.begin(), lib.labels.end());
    REQUIRE((int)labels.size() == lib.size());
}

TEST_CASE("sample budget exhaustion is flagged") {
    Hyperparams hp;
    hp.max_total_samples = 3;
    auto lib = adaptive_sample(random_family(), unit_box(1), pts1d({0.0, 1.0}), hp);
    REQUIRE_FALSE(lib.converged);
    REQUIRE(lib.size() == 3);
    REQUIRE(count_events(lib, "budget_exhausted") == 1);
}

TEST_CASE("2D step family partitions the square") {
    Hyperparams hp;
    auto fam = [](const Vec& p) {
        const Mat V = p[0] < 0.45 ? span_cols(8, {0, 1}) : span_cols(8, {2, 3});
        return make_rm(V, p);
    };
    std::vector<Vec> corners;
    for (int i = 0; i < 4; ++i) {
        Vec p(2);
        p << (i & 1), (i >> 1);
        corners.push_back(p);
    }
    auto lib = adaptive_sample(fam, unit_box(2), corners, hp);
    REQUIRE(lib.converged);
    for (const auto& [e, r] : lib.records) REQUIRE(r.c != 0);
    cluster(lib);
    std::set<int> labels(lib.labels.begin(), lib.labels.end());
    REQUIRE(labels.size() == 2);
    // class membership matches the generating rule
    for (int i = 0; i < lib.size(); ++i)
        REQUIRE(lib.labels[i] == (lib.points_norm[i][0] < 0.45 ? lib.labels[0] : lib.labels[1]));
}

TEST_CASE("clustering equals a BFS connected-components oracle") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        const int K = 2 + (int)(rng() % 11);
        SampleLibrary lib;
        lib.box = unit_box(1);
        lib.labels.assign(K, -1);
        lib.points_norm.resize(K);
        // random graph encoded directly in the edge records
        std::vector<std::vector<int>> adj(K);
        for (int i = 0; i < K; ++i)
            for (int j = i + 1; j < K; ++j) {
                if (rng() % 3 == 0) continue;  // not a triangulation edge
                EdgeRecord r;
                r.c = (int)(rng() % 3) - 1;
                lib.records[make_edge(i, j)] = r;
                if (r.c == 1) {
                    adj[i].push_back(j);
                    adj[j].push_back(i);
                }
            }
        cluster(lib);
        std::vector<int> ref(K, -1);
        int next = 0;
        for (int s = 0; s < K; ++s) {
            if (ref[s] >= 0) continue;
            std::queue<int> q;
            q.push(s);
            ref[s] = next;
            while (!q.empty()) {
                int u = q.front();
                q.pop();
                for (int v : adj[u])
                    if (ref[v] < 0) {
                        ref[v] = next;
                        q.push(v);
                    }
            }
            ++next;
        }
        REQUIRE(lib.labels == ref);
    }
}

TEST_CASE("region filling bisects the largest gap down to the target count") {
    SampleLibrary lib;
    lib.box = unit_box(1);
    lib.hp.min_samples_per_cluster = 4;
    auto rom = constant_family();
    lib.add_sample(pts1d({0.1})[0], rom);
    lib.add_sample(pts1d({0.5})[0], rom);
    lib.labels = {0, 0};
    auto added = fill_region(lib, 0, rom);
    REQUIRE(added.size() == 2);
    REQUIRE(lib.points_norm[added[0]][0] == Catch::Approx(0.3));
    REQUIRE(lib.points_norm[added[1]][0] == Catch::Approx(0.2));  // tie: lowest-index pair
    REQUIRE(fill_region(lib, 0, rom).empty());                    // already at target
}

TEST_CASE("border search classifies probes around a singleton cluster") {
    SampleLibrary lib;
    lib.box = unit_box(1);
    lib.hp.min_samples_per_cluster = 2;
    auto rom = [](const Vec& p) {
        Mat V = p[0] < 0.35   ? span_cols(8, {0, 1})
                : p[0] < 0.65 ? span_cols(8, {2, 3})
                              : span_cols(8, {4, 5});
        return make_rm(V, p);
    };
    lib.add_sample(pts1d({0.2})[0], rom);
    lib.add_sample(pts1d({0.5})[0], rom);
    lib.add_sample(pts1d({0.8})[0], rom);
    lib.labels = {0, 1, 2};
    lib.refresh();
    auto added = find_borders(lib, 1, rom);
    REQUIRE(added.size() == 2);
    REQUIRE(lib.labels[added[0]] == 1);  // 0.35 sits inside the middle regime
    REQUIRE(lib.labels[added[1]] == 2);  // 0.65 belongs to the right regime
    REQUIRE(lib.deleted_clusters.empty());
    REQUIRE(cluster_members(lib, 1).size() == 2);
}

TEST_CASE("undersized cluster is deleted after the round limit") {
    SampleLibrary lib;
    lib.box = unit_box(1);
    lib.hp.min_samples_per_cluster = 2;
    lib.hp.max_border_rounds = 3;
    auto rom = [](const Vec& p) {
        // the middle regime is so narrow that probes never land inside it
        Mat V = (p[0] > 0.499 && p[0] < 0.501) ? span_cols(8, {2, 3}) : span_cols(8, {0, 1});
        return make_rm(V, p);
    };
    lib.add_sample(pts1d({0.2})[0], rom);
    lib.add_sample(pts1d({0.5})[0], rom);
    lib.add_sample(pts1d({0.8})[0], rom);
    lib.labels = {0, 1, 0};
    lib.refresh();
    find_borders(lib, 1, rom);
    REQUIRE(lib.deleted_clusters.count(1) == 1);
    REQUIRE(count_events(lib, "cluster_deleted") == 1);
}

TEST_CASE("degenerate 2D cluster gains off-line samples before filling") {
    SampleLibrary lib;
    lib.box = unit_box(2);
    lib.hp.min_samples_per_cluster = 4;
    auto rom = [](const Vec& p) {
        const Mat V = p[1] < 0.6 ? span_cols(8, {0, 1}) : span_cols(8, {2, 3});
        return make_rm(V, p);
    };
    auto pt = [](double x, double y) {
        Vec p(2);
        p << x, y;
        return p;
    };
    // cluster 0: two collinear samples; cluster 1: three samples above
    lib.add_sample(pt(0.2, 0.2), rom);
    lib.add_sample(pt(0.8, 0.2), rom);
    lib.add_sample(pt(0.1, 0.9), rom);
    lib.add_sample(pt(0.5, 0.9), rom);
    lib.add_sample(pt(0.9, 0.9), rom);
    lib.labels = {0, 0, 1, 1, 1};
    lib.refresh();
    find_borders(lib, 0, rom);
    REQUIRE(lib.deleted_clusters.empty());
    std::vector<Vec> pts;
    for (int id : cluster_members(lib, 0)) pts.push_back(lib.points_norm[id]);
    REQUIRE(pts.size() >= 3);
    REQUIRE(sampling_detail::spans_space(pts, 2));
    REQUIRE_NOTHROW(fill_region(lib, 0, rom));
    REQUIRE((int)cluster_members(lib, 0).size() >= 4);
}

TEST_CASE("long consistent edges are bisected until below the gap limit") {
    SampleLibrary lib;
    lib.box = unit_box(1);
    lib.hp.d_C = 0.3;
    auto rom = constant_family();
    lib.add_sample(pts1d({0.0})[0], rom);
    lib.add_sample(pts1d({1.0})[0], rom);
    lib.labels = {0, 0};
    auto added = fill_long_consistent_edges(lib, rom);
    REQUIRE(added.size() == 3);  // 0.5, then 0.25 and 0.75
    for (const auto& e : lib.tri.edges)
        REQUIRE((lib.points_norm[e.a] - lib.points_norm[e.b]).norm() <= 0.3 + 1e-12);
    REQUIRE(fill_long_consistent_edges(lib, rom).empty());
}

TEST_CASE("finalize_regions yields filled, gap-free clusters") {
    Hyperparams hp;
    hp.min_samples_per_cluster = 3;
    auto lib = adaptive_sample(step_family(), unit_box(1), pts1d({0.0, 1.0}), hp);
    finalize_regions(lib, step_family());
    int n_labels = 0;
    for (int l : lib.labels) n_labels = std::max(n_labels, l + 1);
    for (int cid = 0; cid < n_labels; ++cid) {
        if (lib.deleted_clusters.count(cid)) continue;
        REQUIRE((int)cluster_members(lib, cid).size() >= 3);
    }
    for (const auto& e : lib.tri.edges) {
        if (lib.labels[e.a] != lib.labels[e.b]) continue;
        if (lib.deleted_clusters.count(lib.labels[e.a])) continue;
        REQUIRE((lib.points_norm[e.a] - lib.points_norm[e.b]).norm() <= lib.hp.d_C + 1e-12);
    }
    // labels still respect the generating family
    for (int i = 0; i < lib.size(); ++i)
        for (int j = i + 1; j < lib.size(); ++j)
            if ((lib.points_norm[i][0] < 0.5) == (lib.points_norm[j][0] < 0.5))
                REQUIRE(lib.labels[i] == lib.labels[j]);
}
