#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "pmint/pipeline.hpp"

using namespace pmint;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("pmint_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig tiny_beam_config() {
    ExperimentConfig c;
    c.family = "beam";
    c.n_elements = 10;
    // r must cover the 1-1000 Hz band (~14 modes at the low corner) and sit at a
    // truncation boundary that modes cross inside the box, so regions split.
    c.r = 18;
    c.n_modes = 24;
    c.interp = "spline1d";
    c.f_count = 40;
    c.grid = {9};
    c.hp.min_samples_per_cluster = 4;
    c.validate();
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("toml subset parser handles sections, types and comments") {
    const std::string text = R"(# experiment
[model]
family = "beam"   # inline comment
n_elements = 50
[sampling]
theta_lT = 10.0
flag = true
grid = [21, 21]
)";
    auto kv = parse_toml(text);
    REQUIRE(kv.at("model.family").as_string() == "beam");
    REQUIRE(kv.at("model.n_elements").as_int() == 50);
    REQUIRE(kv.at("sampling.theta_lT").as_number() == Catch::Approx(10.0));
    REQUIRE(kv.at("sampling.flag").as_bool());
    REQUIRE(kv.at("sampling.grid").as_array() == std::vector<double>{21.0, 21.0});
    REQUIRE_THROWS_AS(parse_toml("key value\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_toml("[bad\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
    REQUIRE_THROWS_AS(kv.at("model.family").as_number(), ConfigError);
}

TEST_CASE("config parsing applies values and rejects mistakes") {
    auto kv = parse_toml(R"(
[model]
family = "kelvin2d"
elements_per_strut = 4
[mor]
r = 30
[sampling]
min_samples_per_cluster = 1
[interp]
kind = "ridge"
[evaluate]
grid = [5, 5]
)");
    const ExperimentConfig c = config_from_toml(kv);
    REQUIRE(c.family == "kelvin2d");
    REQUIRE(c.r == 30);
    REQUIRE(c.hp.min_samples_per_cluster == 1);
    REQUIRE(c.box().dim() == 2);
    REQUIRE(c.modes() == 40);

    auto bad = kv;
    bad["model.typo_key"] = TomlValue{"1"};
    REQUIRE_THROWS_AS(config_from_toml(bad), ConfigError);
    auto degenerate = kv;
    degenerate["sampling.theta_lT"] = TomlValue{"88"};  // >= theta_uT
    REQUIRE_THROWS_AS(config_from_toml(degenerate), ConfigError);
    auto badgrid = kv;
    badgrid["evaluate.grid"] = TomlValue{"[5]"};  // dimension mismatch
    REQUIRE_THROWS_AS(config_from_toml(badgrid), ConfigError);
}

TEST_CASE("preset configs load and validate") {
    for (const std::string name : {"beam", "kelvin2d", "kelvin3d"}) {
        const ExperimentConfig c = load_config(std::string(PMINT_SOURCE_DIR) + "/configs/" + name + ".toml");
        REQUIRE(c.family == name);
        REQUIRE(c.hp.theta_lT == Catch::Approx(10.0));
        REQUIRE(c.hp.theta_uT == Catch::Approx(85.0));
        REQUIRE(c.hp.d_lT == Catch::Approx(0.1));
        REQUIRE(c.hp.d_uT == Catch::Approx(0.2));
        REQUIRE(c.hp.d_C == Catch::Approx(0.3));
        if (name == "beam") {
            REQUIRE(c.hp.min_samples_per_cluster == 4);
            REQUIRE(c.interp == "spline1d");
        } else {
            REQUIRE(c.hp.min_samples_per_cluster == 1);
            REQUIRE(c.interp == "ridge");
        }
        if (name == "kelvin3d") REQUIRE(c.hp.d_N == Catch::Approx(0.05));
    }
}

TEST_CASE("sample library round-trips through disk") {
    ExperimentConfig c = tiny_beam_config();
    auto rom = make_rom_evaluator(c);
    SampleLibrary lib;
    lib.box = c.box();
    lib.hp = c.hp;
    for (double x : {0.02, 0.035, 0.05}) {
        Vec p(1);
        p << x;
        lib.add_sample(lib.box.normalize(p), rom);
    }
    lib.labels = {0, 0, 1};
    lib.deleted_clusters.insert(7);
    lib.forced[make_edge(0, 2)] = -1;
    lib.refresh();

    const fs::path dir = temp_dir("lib");
    save_library(lib, dir);
    const SampleLibrary back = load_library(dir);
    REQUIRE(back.size() == lib.size());
    REQUIRE(back.labels == lib.labels);
    REQUIRE(back.deleted_clusters == lib.deleted_clusters);
    REQUIRE(back.forced == lib.forced);
    REQUIRE(back.events == lib.events);
    REQUIRE(back.hp.d_C == lib.hp.d_C);
    for (int i = 0; i < lib.size(); ++i) {
        REQUIRE((back.models[i].V - lib.models[i].V).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.models[i].K_r - lib.models[i].K_r).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.models[i].f_r - lib.models[i].f_r).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.points_phys[i] - lib.points_phys[i]).cwiseAbs().maxCoeff() == 0.0);
    }
    // triangulation and consistency records are rebuilt identically
    REQUIRE(back.records.size() == lib.records.size());
    for (const auto& [e, r] : lib.records) {
        REQUIRE(back.records.count(e) == 1);
        REQUIRE(back.records.at(e).c == r.c);
        REQUIRE(back.records.at(e).theta == Catch::Approx(r.theta).margin(1e-12));
    }
    fs::remove_all(dir);
}

TEST_CASE("prom set round-trips and predicts identically") {
    ExperimentConfig c = tiny_beam_config();
    auto rom = make_rom_evaluator(c);
    SampleLibrary lib;
    lib.box = c.box();
    lib.hp = c.hp;
    for (double x : {0.036, 0.040, 0.044, 0.048}) {  // inside one consistent region
        Vec p(1);
        p << x;
        lib.add_sample(lib.box.normalize(p), rom);
    }
    lib.labels.assign(4, 0);
    lib.refresh();
    const PromSet set = train_prom_set(lib, InterpKind::spline1d);

    const fs::path dir = temp_dir("promset");
    save_promset(set, dir);
    const PromSet back = load_promset(dir);
    REQUIRE(back.proms.size() == set.proms.size());
    REQUIRE(back.k == set.k);
    Vec q(1);
    q << 0.7;
    const Prediction a = predict(set, q), b = predict(back, q);
    REQUIRE(a.cluster_id == b.cluster_id);
    REQUIRE((a.rm.M_r - b.rm.M_r).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.rm.K_r - b.rm.K_r).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.rm.g_r - b.rm.g_r).cwiseAbs().maxCoeff() == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("csv writers emit well-formed tables") {
    const fs::path dir = temp_dir("csv");
    Vec p(2);
    p << 0.0675, 0.0325;
    write_errors_csv({{p, "proposed", 1e-4, ""}, {p, "amsallem", std::nan(""), "singular"}},
                     2, dir / "errors.csv");
    const std::string errors = slurp(dir / "errors.csv");
    REQUIRE(errors.rfind("p1,p2,method,h2_rel,note\n", 0) == 0);
    REQUIRE(errors.find("proposed,0.0001") != std::string::npos);
    REQUIRE(errors.find("amsallem,nan,singular") != std::string::npos);

    write_indicator_csv({{p, 3, false, true}}, 2, dir / "indicator.csv");
    REQUIRE(slurp(dir / "indicator.csv")
                .find("indicator,extrapolated,remedy_used\n") != std::string::npos);

    const Vec w = frequency_grid(1.0, 10.0, 3);
    CVec H(3);
    H << std::complex<double>(1, 2), std::complex<double>(0, -1), std::complex<double>(3, 0);
    write_frf_csv(w, H, dir / "frf.csv");
    const std::string frf = slurp(dir / "frf.csv");
    REQUIRE(frf.rfind("f_hz,re,im,abs\n", 0) == 0);
    REQUIRE(frf.find("1,1,2,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("manifest hash is stable and content-sensitive") {
    REQUIRE(fnv1a("abc") == fnv1a("abc"));
    REQUIRE(fnv1a("abc") != fnv1a("abd"));
    const fs::path dir = temp_dir("manifest");
    write_manifest("[model]\nfamily = \"beam\"\n", 42, dir);
    json j;
    std::ifstream in(dir / "manifest.json");
    in >> j;
    REQUIRE(j.at("seed") == 42);
    REQUIRE(j.at("config_hash") == fnv1a("[model]\nfamily = \"beam\"\n"));
    fs::remove_all(dir);
}

TEST_CASE("matrix market dump matches the sparse operator") {
    SpMat A(3, 3);
    std::vector<Eigen::Triplet<double>> t{{0, 0, 2.0}, {1, 2, -1.5}, {2, 1, 0.25}};
    A.setFromTriplets(t.begin(), t.end());
    const fs::path dir = temp_dir("mm");
    write_matrix_market(A, dir / "K.mtx");
    std::ifstream in(dir / "K.mtx");
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "%%MatrixMarket matrix coordinate real general");
    int r, c, nnz;
    in >> r >> c >> nnz;
    REQUIRE(r == 3);
    REQUIRE(nnz == 3);
    double sum = 0.0;
    for (int k = 0; k < nnz; ++k) {
        int i, j;
        double v;
        in >> i >> j >> v;
        REQUIRE(A.coeff(i - 1, j - 1) == Catch::Approx(v));
        sum += v;
    }
    REQUIRE(sum == Catch::Approx(0.75));
    fs::remove_all(dir);
}

TEST_CASE("beam pipeline end to end on a coarse mesh") {
    ExperimentConfig c = tiny_beam_config();
    auto rom = make_rom_evaluator(c);
    SampleLibrary lib = run_sampling(c, rom);
    REQUIRE(lib.converged);
    cluster(lib);  // labels already assigned; re-running must be stable
    const PromSet set = train_prom_set(lib, InterpKind::spline1d);
    REQUIRE(set.proms.size() >= 2);  // the beam family switches modes in the box

    EvalOptions opt;
    opt.methods = {"proposed", "matrix-interp"};
    const EvalResult res = evaluate_grid(c, lib, set, opt);
    REQUIRE(res.rows.size() == 9 * 2);
    REQUIRE(res.indicator.size() == 9);
    std::vector<double> prop, base;
    for (const auto& row : res.rows) {
        if (row.method == "proposed" && std::isfinite(row.h2_rel)) prop.push_back(row.h2_rel);
        if (row.method == "matrix-interp" && std::isfinite(row.h2_rel))
            base.push_back(row.h2_rel);
    }
    REQUIRE(prop.size() == 9);
    std::sort(prop.begin(), prop.end());
    // interior accuracy: median well below 1%
    REQUIRE(prop[prop.size() / 2] < 1e-2);

    // deterministic parallel evaluation: 3 workers give identical rows
    EvalOptions opt3 = opt;
    opt3.workers = 3;
    const EvalResult res3 = evaluate_grid(c, lib, set, opt3);
    for (size_t i = 0; i < res.rows.size(); ++i) {
        REQUIRE(res.rows[i].method == res3.rows[i].method);
        if (std::isfinite(res.rows[i].h2_rel))
            REQUIRE(res.rows[i].h2_rel == res3.rows[i].h2_rel);
    }
}

TEST_CASE("library persistence preserves pipeline behavior") {
    ExperimentConfig c = tiny_beam_config();
    c.grid = {5};
    auto rom = make_rom_evaluator(c);
    SampleLibrary lib = run_sampling(c, rom);
    const fs::path dir = temp_dir("roundtrip");
    save_library(lib, dir);
    const SampleLibrary back = load_library(dir);
    const PromSet a = train_prom_set(lib, InterpKind::spline1d);
    const PromSet b = train_prom_set(back, InterpKind::spline1d);
    const EvalResult ra = evaluate_grid(c, lib, a, {});
    const EvalResult rb = evaluate_grid(c, back, b, {});
    REQUIRE(ra.rows.size() == rb.rows.size());
    for (size_t i = 0; i < ra.rows.size(); ++i)
        REQUIRE(ra.rows[i].h2_rel == rb.rows[i].h2_rel);
    fs::remove_all(dir);
}
