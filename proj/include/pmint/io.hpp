#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmint/fem/models.hpp"
#include "pmint/prom.hpp"
#include "pmint/sampling.hpp"

namespace pmint {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// TOML-subset parser: [section], key = value, value ∈ number | "string" |
// true/false | [v1, v2, ...]; # comments
// ---------------------------------------------------------------------------

struct TomlValue {
    std::string raw;

    double as_number() const {
        try {
            size_t pos = 0;
            const double v = std::stod(raw, &pos);
            while (pos < raw.size() && std::isspace((unsigned char)raw[pos])) ++pos;
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: not a number: '" + raw + "'");
        }
    }
    int as_int() const {
        const double v = as_number();
        if (v != (double)(long long)v) throw ConfigError("config: not an integer: '" + raw + "'");
        return (int)v;
    }
    bool as_bool() const {
        if (raw == "true") return true;
        if (raw == "false") return false;
        throw ConfigError("config: not a boolean: '" + raw + "'");
    }
    std::string as_string() const {
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
            return raw.substr(1, raw.size() - 2);
        return raw;
    }
    std::vector<double> as_array() const {
        if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
            throw ConfigError("config: not an array: '" + raw + "'");
        std::vector<double> out;
        std::string body = raw.substr(1, raw.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(TomlValue{item}.as_number());
        return out;
    }
};

inline std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> kv;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside of quotes
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        const std::string full = section.empty() ? key : section + "." + key;
        if (kv.count(full))
            throw ConfigError("config: duplicate key '" + full + "'");
        kv[full] = TomlValue{val};
    }
    return kv;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string family = "beam";  // beam | kelvin2d | kelvin3d
    int n_elements = 50;
    int elements_per_strut = 10;
    // Rayleigh coefficients for C = alpha*M + beta*K; negative → model default.
    double rayleigh_alpha = -1.0, rayleigh_beta = -1.0;
    Vec lower, upper;  // physical parameter box; empty → family default

    int r = 20;
    int n_modes = 0;  // computed modes; 0 → r + 10
    std::string selection = "dominant";

    Hyperparams hp;

    std::string interp = "spline1d";
    double lambda = 1e-5;

    double f_lo_hz = 1.0, f_hi_hz = 1000.0;
    int f_count = 1000;
    bool h2_squared = false;

    std::vector<int> grid;  // per-dimension test-point counts
    int workers = 1;
    uint64_t seed = 0;

    FomFamily fam() const {
        if (family == "beam") return FomFamily::beam;
        if (family == "kelvin2d") return FomFamily::kelvin2d;
        if (family == "kelvin3d") return FomFamily::kelvin3d;
        throw ConfigError("unknown model family: " + family);
    }

    ParamBox box() const {
        const FamilyBox fb = family_box(fam());
        ParamBox b;
        b.lower = lower.size() ? lower : fb.lower;
        b.upper = upper.size() ? upper : fb.upper;
        b.validate();
        return b;
    }

    int modes() const { return n_modes > 0 ? n_modes : r + 10; }

    void validate() const {
        box();
        if (r < 1) throw ConfigError("config: r >= 1 required");
        if (modes() < r) throw ConfigError("config: n_modes must be >= r");
        if (selection != "lowest" && selection != "dominant")
            throw ConfigError("config: selection must be lowest or dominant");
        hp.validate();
        interp_kind_from_string(interp);
        if (lambda <= 0.0) throw ConfigError("config: lambda > 0 required");
        if (!(f_lo_hz > 0.0 && f_lo_hz < f_hi_hz))
            throw ConfigError("config: frequency band must be positive and ascending");
        if (f_count < 2) throw ConfigError("config: need >= 2 frequency points");
        if (!grid.empty() && (int)grid.size() != box().dim())
            throw ConfigError("config: test grid dimension mismatch");
        for (int g : grid)
            if (g < 1) throw ConfigError("config: test grid counts must be >= 1");
        if (workers < 1) throw ConfigError("config: workers >= 1 required");
    }
};

inline ExperimentConfig config_from_toml(const std::map<std::string, TomlValue>& kv) {
    ExperimentConfig c;
    std::set<std::string> seen;
    auto get = [&](const std::string& key) -> const TomlValue* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        seen.insert(key);
        return &it->second;
    };
    if (auto v = get("model.family")) c.family = v->as_string();
    if (auto v = get("model.n_elements")) c.n_elements = v->as_int();
    if (auto v = get("model.elements_per_strut")) c.elements_per_strut = v->as_int();
    if (auto v = get("model.rayleigh_alpha")) c.rayleigh_alpha = v->as_number();
    if (auto v = get("model.rayleigh_beta")) c.rayleigh_beta = v->as_number();
    if (auto v = get("box.lower")) {
        const auto a = v->as_array();
        c.lower = Eigen::Map<const Vec>(a.data(), (Index)a.size());
    }
    if (auto v = get("box.upper")) {
        const auto a = v->as_array();
        c.upper = Eigen::Map<const Vec>(a.data(), (Index)a.size());
    }
    if (auto v = get("mor.r")) c.r = v->as_int();
    if (auto v = get("mor.n_modes")) c.n_modes = v->as_int();
    if (auto v = get("mor.selection")) c.selection = v->as_string();
    if (auto v = get("sampling.theta_lT")) c.hp.theta_lT = v->as_number();
    if (auto v = get("sampling.theta_uT")) c.hp.theta_uT = v->as_number();
    if (auto v = get("sampling.d_lT")) c.hp.d_lT = v->as_number();
    if (auto v = get("sampling.d_uT")) c.hp.d_uT = v->as_number();
    if (auto v = get("sampling.d_N")) c.hp.d_N = v->as_number();
    if (auto v = get("sampling.d_C")) c.hp.d_C = v->as_number();
    if (auto v = get("sampling.min_samples_per_cluster"))
        c.hp.min_samples_per_cluster = v->as_int();
    if (auto v = get("sampling.angle_decrease_fraction"))
        c.hp.angle_decrease_fraction = v->as_number();
    if (auto v = get("sampling.max_border_rounds")) c.hp.max_border_rounds = v->as_int();
    if (auto v = get("sampling.max_total_samples")) c.hp.max_total_samples = v->as_int();
    if (auto v = get("sampling.d_refine_inconsistent"))
        c.hp.d_refine_inconsistent = v->as_bool();
    if (auto v = get("interp.kind")) c.interp = v->as_string();
    if (auto v = get("interp.lambda")) c.lambda = v->as_number();
    if (auto v = get("frequency.lo_hz")) c.f_lo_hz = v->as_number();
    if (auto v = get("frequency.hi_hz")) c.f_hi_hz = v->as_number();
    if (auto v = get("frequency.count")) c.f_count = v->as_int();
    if (auto v = get("frequency.h2_squared")) c.h2_squared = v->as_bool();
    if (auto v = get("evaluate.grid")) {
        c.grid.clear();
        for (double g : v->as_array()) c.grid.push_back((int)g);
    }
    if (auto v = get("evaluate.workers")) c.workers = v->as_int();
    if (auto v = get("output.seed")) c.seed = (uint64_t)v->as_number();
    for (const auto& [key, val] : kv)
        if (!seen.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_toml(parse_toml(ss.str()));
}

// ---------------------------------------------------------------------------
// Binary matrix blobs
// ---------------------------------------------------------------------------

namespace io_detail {

inline void write_mat(std::ostream& os, const Mat& A) {
    const int64_t r = A.rows(), c = A.cols();
    os.write((const char*)&r, 8);
    os.write((const char*)&c, 8);
    for (Index j = 0; j < A.cols(); ++j)
        for (Index i = 0; i < A.rows(); ++i) {
            const double v = A(i, j);
            os.write((const char*)&v, 8);
        }
}

inline Mat read_mat(std::istream& is) {
    int64_t r = 0, c = 0;
    is.read((char*)&r, 8);
    is.read((char*)&c, 8);
    if (!is || r < 0 || c < 0 || r * c > (int64_t)1e9)
        throw NumericError("corrupt binary blob");
    Mat A(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) {
            double v;
            is.read((char*)&v, 8);
            A(i, j) = v;
        }
    if (!is) throw NumericError("corrupt binary blob (truncated)");
    return A;
}

inline void write_vec(std::ostream& os, const Vec& v) { write_mat(os, Mat(v)); }
inline Vec read_vec(std::istream& is) { return Vec(read_mat(is)); }

inline std::vector<double> to_std(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}
inline Vec from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), (Index)v.size());
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// SampleLibrary persistence: library.json + one binary operator file/sample
// ---------------------------------------------------------------------------

inline json hyperparams_to_json(const Hyperparams& hp) {
    return json{{"theta_lT", hp.theta_lT},
                {"theta_uT", hp.theta_uT},
                {"d_lT", hp.d_lT},
                {"d_uT", hp.d_uT},
                {"d_N", hp.d_N},
                {"d_C", hp.d_C},
                {"min_samples_per_cluster", hp.min_samples_per_cluster},
                {"angle_decrease_fraction", hp.angle_decrease_fraction},
                {"max_border_rounds", hp.max_border_rounds},
                {"max_total_samples", hp.max_total_samples},
                {"d_refine_inconsistent", hp.d_refine_inconsistent}};
}

inline Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams hp;
    hp.theta_lT = j.at("theta_lT");
    hp.theta_uT = j.at("theta_uT");
    hp.d_lT = j.at("d_lT");
    hp.d_uT = j.at("d_uT");
    hp.d_N = j.at("d_N");
    hp.d_C = j.at("d_C");
    hp.min_samples_per_cluster = j.at("min_samples_per_cluster");
    hp.angle_decrease_fraction = j.at("angle_decrease_fraction");
    hp.max_border_rounds = j.at("max_border_rounds");
    hp.max_total_samples = j.at("max_total_samples");
    hp.d_refine_inconsistent = j.at("d_refine_inconsistent");
    return hp;
}

inline std::string sample_filename(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%04d.bin", id);
    return buf;
}

inline void save_library(const SampleLibrary& lib, const fs::path& dir) {
    fs::create_directories(dir);
    json j;
    j["box"] = {{"lower", io_detail::to_std(lib.box.lower)},
                {"upper", io_detail::to_std(lib.box.upper)}};
    j["hyperparams"] = hyperparams_to_json(lib.hp);
    j["converged"] = lib.converged;
    j["labels"] = lib.labels;
    j["deleted_clusters"] = std::vector<int>(lib.deleted_clusters.begin(),
                                             lib.deleted_clusters.end());
    j["events"] = lib.events;
    json pts = json::array();
    for (int i = 0; i < lib.size(); ++i)
        pts.push_back({{"phys", io_detail::to_std(lib.points_phys[i])},
                       {"norm", io_detail::to_std(lib.points_norm[i])}});
    j["points"] = pts;
    json forced = json::array();
    for (const auto& [e, c] : lib.forced) forced.push_back({{"a", e.a}, {"b", e.b}, {"c", c}});
    j["forced"] = forced;
    json recs = json::array();
    for (const auto& [e, r] : lib.records)
        recs.push_back(
            {{"a", e.a}, {"b", e.b}, {"d", r.d}, {"theta", r.theta}, {"c", r.c}});
    j["edges"] = recs;
    std::ofstream out(dir / "library.json");
    out << j.dump(2) << "\n";
    for (int i = 0; i < lib.size(); ++i) {
        std::ofstream bin(dir / sample_filename(i), std::ios::binary);
        const ReducedModel& rm = lib.models[i];
        io_detail::write_mat(bin, rm.V);
        io_detail::write_mat(bin, rm.M_r);
        io_detail::write_mat(bin, rm.C_r);
        io_detail::write_mat(bin, rm.K_r);
        io_detail::write_vec(bin, rm.f_r);
        io_detail::write_vec(bin, rm.g_r.transpose());
        io_detail::write_vec(bin, rm.p);
    }
}

inline SampleLibrary load_library(const fs::path& dir) {
    std::ifstream in(dir / "library.json");
    if (!in) throw ConfigError("cannot open library: " + (dir / "library.json").string());
    json j;
    in >> j;
    SampleLibrary lib;
    lib.box.lower = io_detail::from_std(j.at("box").at("lower"));
    lib.box.upper = io_detail::from_std(j.at("box").at("upper"));
    lib.hp = hyperparams_from_json(j.at("hyperparams"));
    lib.converged = j.at("converged");
    lib.labels = j.at("labels").get<std::vector<int>>();
    for (int c : j.at("deleted_clusters").get<std::vector<int>>())
        lib.deleted_clusters.insert(c);
    lib.events = j.at("events").get<std::vector<std::string>>();
    for (const auto& p : j.at("points")) {
        lib.points_phys.push_back(io_detail::from_std(p.at("phys")));
        lib.points_norm.push_back(io_detail::from_std(p.at("norm")));
    }
    for (const auto& f : j.at("forced"))
        lib.forced[make_edge(f.at("a"), f.at("b"))] = f.at("c");
    for (int i = 0; i < (int)lib.points_norm.size(); ++i) {
        std::ifstream bin(dir / sample_filename(i), std::ios::binary);
        if (!bin) throw ConfigError("missing sample file: " + sample_filename(i));
        ReducedModel rm;
        rm.V = io_detail::read_mat(bin);
        rm.M_r = io_detail::read_mat(bin);
        rm.C_r = io_detail::read_mat(bin);
        rm.K_r = io_detail::read_mat(bin);
        rm.f_r = io_detail::read_vec(bin);
        rm.g_r = io_detail::read_vec(bin).transpose();
        rm.p = io_detail::read_vec(bin);
        rm.r = rm.M_r.rows();
        lib.models.push_back(std::move(rm));
    }
    lib.refresh();
    return lib;
}

// ---------------------------------------------------------------------------
// PROMSet persistence: promset.json + one blob per local model; interpolants
// are re-fitted deterministically from the stored training data on load
// ---------------------------------------------------------------------------

inline std::string prom_filename(int idx) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "prom_%03d.bin", idx);
    return buf;
}

inline void save_promset(const PromSet& set, const fs::path& dir, double lambda = 1e-5) {
    fs::create_directories(dir);
    json j;
    j["box"] = {{"lower", io_detail::to_std(set.box.lower)},
                {"upper", io_detail::to_std(set.box.upper)}};
    j["k"] = set.k;
    j["lambda"] = lambda;
    j["cls_labels"] = set.cls_labels;
    j["cls_sample_ids"] = set.cls_sample_ids;
    json proms = json::array();
    for (const auto& lp : set.proms)
        proms.push_back({{"cluster_id", lp.cluster_id},
                         {"kind", to_string(lp.kind)},
                         {"r", (int)lp.r},
                         {"member_ids", lp.member_ids}});
    j["proms"] = proms;
    std::ofstream out(dir / "promset.json");
    out << j.dump(2) << "\n";
    {
        std::ofstream bin(dir / "classifier.bin", std::ios::binary);
        io_detail::write_mat(bin, set.cls_points);
    }
    for (size_t i = 0; i < set.proms.size(); ++i) {
        std::ofstream bin(dir / prom_filename((int)i), std::ios::binary);
        io_detail::write_mat(bin, set.proms[i].R.R);
        io_detail::write_mat(bin, set.proms[i].train_points);
        io_detail::write_mat(bin, set.proms[i].train_values);
    }
}

inline PromSet load_promset(const fs::path& dir) {
    std::ifstream in(dir / "promset.json");
    if (!in) throw ConfigError("cannot open prom set: " + (dir / "promset.json").string());
    json j;
    in >> j;
    PromSet set;
    set.box.lower = io_detail::from_std(j.at("box").at("lower"));
    set.box.upper = io_detail::from_std(j.at("box").at("upper"));
    set.k = j.at("k");
    const double lambda = j.at("lambda");
    set.cls_labels = j.at("cls_labels").get<std::vector<int>>();
    set.cls_sample_ids = j.at("cls_sample_ids").get<std::vector<int>>();
    {
        std::ifstream bin(dir / "classifier.bin", std::ios::binary);
        if (!bin) throw ConfigError("missing classifier.bin");
        set.cls_points = io_detail::read_mat(bin);
    }
    int idx = 0;
    for (const auto& pj : j.at("proms")) {
        LocalProm lp;
        lp.cluster_id = pj.at("cluster_id");
        lp.kind = interp_kind_from_string(pj.at("kind"));
        lp.r = (Index)(int)pj.at("r");
        lp.member_ids = pj.at("member_ids").get<std::vector<int>>();
        std::ifstream bin(dir / prom_filename(idx), std::ios::binary);
        if (!bin) throw ConfigError("missing " + prom_filename(idx));
        lp.R.R = io_detail::read_mat(bin);
        lp.R.source_sample_ids = lp.member_ids;
        lp.train_points = io_detail::read_mat(bin);
        lp.train_values = io_detail::read_mat(bin);
        lp.fit(lambda);
        set.prom_of_cluster[lp.cluster_id] = idx++;
        set.proms.push_back(std::move(lp));
    }
    return set;
}

// ---------------------------------------------------------------------------
// CSV, manifest, triangulation export
// ---------------------------------------------------------------------------

struct ErrorRow {
    Vec p;  // physical coordinates
    std::string method;
    double h2_rel = 0.0;  // NaN on failure
    std::string note;     // failure reason, empty otherwise
};

inline void write_errors_csv(const std::vector<ErrorRow>& rows, int dim,
                             const fs::path& path) {
    std::ofstream out(path);
    for (int k = 0; k < dim; ++k) out << "p" << (k + 1) << ",";
    out << "method,h2_rel,note\n";
    out.precision(17);
    for (const auto& r : rows) {
        for (Index k = 0; k < r.p.size(); ++k) out << r.p[k] << ",";
        out << r.method << "," << r.h2_rel << "," << r.note << "\n";
    }
}

struct IndicatorRow {
    Vec p;
    int indicator = 0;
    bool extrapolated = false;
    bool remedy_used = false;
};

inline void write_indicator_csv(const std::vector<IndicatorRow>& rows, int dim,
                                const fs::path& path) {
    std::ofstream out(path);
    for (int k = 0; k < dim; ++k) out << "p" << (k + 1) << ",";
    out << "indicator,extrapolated,remedy_used\n";
    out.precision(17);
    for (const auto& r : rows) {
        for (Index k = 0; k < r.p.size(); ++k) out << r.p[k] << ",";
        out << r.indicator << "," << (int)r.extrapolated << "," << (int)r.remedy_used << "\n";
    }
}

inline void write_frf_csv(const Vec& freqs_rad, const CVec& H, const fs::path& path) {
    std::ofstream out(path);
    out << "f_hz,re,im,abs\n";
    out.precision(17);
    for (Index i = 0; i < freqs_rad.size(); ++i)
        out << freqs_rad[i] / (2.0 * kPi) << "," << H[i].real() << "," << H[i].imag() << ","
            << std::abs(H[i]) << "\n";
}

inline uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline void write_manifest(const std::string& config_text, uint64_t seed,
                           const fs::path& dir) {
    fs::create_directories(dir);
    json j;
    j["config_hash"] = fnv1a(config_text);
    j["seed"] = seed;
    j["format_version"] = 1;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << "\n";
}

inline void write_triangulation_json(const SampleLibrary& lib, const fs::path& path) {
    json j;
    json pts = json::array();
    for (int i = 0; i < lib.size(); ++i)
        pts.push_back({{"norm", io_detail::to_std(lib.points_norm[i])},
                       {"phys", io_detail::to_std(lib.points_phys[i])},
                       {"label", lib.labels.empty() ? -1 : lib.labels[i]}});
    j["points"] = pts;
    j["simplices"] = lib.tri.simplices;
    json edges = json::array();
    for (const auto& [e, r] : lib.records)
        edges.push_back(
            {{"a", e.a}, {"b", e.b}, {"d", r.d}, {"theta", r.theta}, {"c", r.c}});
    j["edges"] = edges;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

/// Optional sparse-operator dump in Matrix Market coordinate format.
inline void write_matrix_market(const SpMat& A, const fs::path& path) {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
    out.precision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

}  // namespace pmint
