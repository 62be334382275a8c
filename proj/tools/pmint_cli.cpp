// Command-line driver: sample -> train -> evaluate / predict / baseline.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure,
// 4 sampling budget exhausted.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pmint/pipeline.hpp"

namespace {

using namespace pmint;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int workers = 0;        // 0 -> take the config value
    uint64_t seed = 0;
    bool seed_set = false;
};

ExperimentConfig load(const CommonArgs& a, std::string& config_text) {
    config_text = slurp(a.config_path);
    ExperimentConfig c = config_from_toml(parse_toml(config_text));
    if (a.workers > 0) c.workers = a.workers;
    if (a.seed_set) c.seed = a.seed;
    return c;
}

int cmd_sample(const CommonArgs& a) {
    std::string text;
    const ExperimentConfig c = load(a, text);
    const RomEvaluator rom = make_rom_evaluator(c);
    std::cout << "sampling family=" << c.family << " r=" << c.r << "\n";
    SampleLibrary lib = run_sampling(c, rom);
    write_manifest(text, c.seed, a.out_dir);
    save_library(lib, fs::path(a.out_dir) / "library");
    write_triangulation_json(lib, fs::path(a.out_dir) / "triangulation.json");
    std::set<int> labels;
    for (int i = 0; i < lib.size(); ++i)
        if (!lib.deleted_clusters.count(lib.labels[i])) labels.insert(lib.labels[i]);
    std::cout << "samples=" << lib.size() << " clusters=" << labels.size()
              << " deleted=" << lib.deleted_clusters.size()
              << " converged=" << (lib.converged ? "yes" : "no") << "\n";
    if (!lib.converged) {
        std::cerr << "warning: sample budget exhausted, partial library saved\n";
        return 4;
    }
    return 0;
}

int cmd_train(const CommonArgs& a) {
    std::string text;
    const ExperimentConfig c = load(a, text);
    SampleLibrary lib = load_library(fs::path(a.out_dir) / "library");
    for (const auto& [e, r] : lib.records)
        if (r.c == 0)
            throw ConfigError("library has unresolved edges; rerun `sample` until convergence");
    const PromSet set = train_prom_set(lib, interp_kind_from_string(c.interp), 1, c.lambda);
    save_promset(set, fs::path(a.out_dir) / "promset", c.lambda);
    for (const auto& lp : set.proms) {
        double cond_max = 0.0;
        for (int id : lp.member_ids) {
            const Transformation tr = transformation(lib.models[id].V, lp.R);
            cond_max = std::max(cond_max, tr.condition);
        }
        std::cout << "cluster " << lp.cluster_id << ": " << lp.member_ids.size()
                  << " samples, r=" << lp.r << ", max cond(R^T V)=" << cond_max << "\n";
    }
    return 0;
}

int run_evaluation(const CommonArgs& a, const std::vector<std::string>& methods,
                   bool remedy, const std::string& csv_name) {
    std::string text;
    const ExperimentConfig c = load(a, text);
    SampleLibrary lib = load_library(fs::path(a.out_dir) / "library");
    const PromSet set = load_promset(fs::path(a.out_dir) / "promset");
    EvalOptions opt;
    opt.methods = methods;
    opt.remedy = remedy;
    opt.workers = c.workers;
    const EvalResult res = evaluate_grid(c, lib, set, opt);
    const int d = c.box().dim();
    write_errors_csv(res.rows, d, fs::path(a.out_dir) / csv_name);
    write_indicator_csv(res.indicator, d, fs::path(a.out_dir) / "indicator.csv");
    {
        nlohmann::json t;
        t["fom_seconds"] = res.fom_seconds;
        t["predict_seconds"] = res.predict_seconds;
        t["n_points"] = res.indicator.size();
        std::ofstream out(fs::path(a.out_dir) / "timings.json");
        out << t.dump(2) << "\n";
    }
    int failures = 0;
    for (const auto& r : res.rows)
        if (std::isnan(r.h2_rel)) ++failures;
    std::cout << "evaluated " << res.indicator.size() << " points, " << methods.size()
              << " method(s), " << failures << " per-point failure(s)\n"
              << "fom total " << res.fom_seconds << " s, prediction total "
              << res.predict_seconds << " s\n";
    return 0;
}

int cmd_predict(const CommonArgs& a, const std::vector<double>& point, bool remedy) {
    std::string text;
    const ExperimentConfig c = load(a, text);
    SampleLibrary lib = load_library(fs::path(a.out_dir) / "library");
    const PromSet set = load_promset(fs::path(a.out_dir) / "promset");
    if ((int)point.size() != lib.box.dim())
        throw ConfigError("`--point` needs " + std::to_string(lib.box.dim()) + " coordinates");
    const Vec p_phys = Eigen::Map<const Vec>(point.data(), (Index)point.size());
    const Vec p_norm = lib.box.normalize(p_phys);

    const IndicatorResult ind = inconsistency_indicator(set, lib, p_norm);
    const Vec freqs = frequency_grid(c.f_lo_hz, c.f_hi_hz, c.f_count);
    bool used_remedy = false;
    CVec H;
    Prediction pred;
    if (remedy && ind.count > 0) {
        const ParametricFom fom = make_fom(c);
        H = transfer_function(global_basis_reduce(fom(p_phys), lib, p_norm), freqs);
        used_remedy = true;
    } else {
        pred = predict(set, p_norm);
        H = transfer_function(pred.rm, freqs);
    }
    fs::create_directories(a.out_dir);
    write_frf_csv(freqs, H, fs::path(a.out_dir) / "frf.csv");
    {
        nlohmann::json meta;
        meta["point"] = point;
        meta["indicator"] = ind.count;
        meta["extrapolated"] = ind.extrapolated;
        meta["remedy_used"] = used_remedy;
        if (!used_remedy) {
            meta["cluster"] = pred.cluster_id;
            meta["spd_warning"] = pred.spd_warning;
        }
        std::ofstream out(fs::path(a.out_dir) / "predict_meta.json");
        out << meta.dump(2) << "\n";
    }
    std::cout << "indicator=" << ind.count << (used_remedy ? " (global-basis remedy)" : "")
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local parametric reduced-order models by consistency-aware "
                 "matrix interpolation"};
    app.require_subcommand(1);

    CommonArgs a;
    std::vector<std::string> methods = {"proposed"};
    std::vector<double> point;
    bool remedy = false;

    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        sub->add_option("--config", a.config_path, "experiment config (TOML)")
            ->required(need_config);
        sub->add_option("--out", a.out_dir, "run directory");
        sub->add_option("--workers", a.workers, "worker thread count override");
        sub->add_option("--seed", a.seed, "seed override")
            ->each([&](const std::string&) { a.seed_set = true; });
    };

    CLI::App* sample = app.add_subcommand("sample", "adaptive sampling + clustering");
    add_common(sample);
    CLI::App* train = app.add_subcommand("train", "train per-cluster interpolants");
    add_common(train);
    CLI::App* evaluate = app.add_subcommand("evaluate", "H2 error map over the test grid");
    add_common(evaluate);
    evaluate->add_option("--method", methods, "proposed|matrix-interp|amsallem|global-remedy")
        ->delimiter(',');
    evaluate->add_flag("--remedy", remedy, "reroute flagged points to the global basis");
    CLI::App* predict = app.add_subcommand("predict", "FRF at one parameter point");
    add_common(predict);
    predict->add_option("--point", point, "physical parameter coordinates")
        ->required()
        ->delimiter(',');
    predict->add_flag("--remedy", remedy, "use the global basis when the indicator fires");
    CLI::App* baseline = app.add_subcommand("baseline", "error map of the baseline methods");
    add_common(baseline);
    baseline->add_option("--method", methods, "matrix-interp|amsallem");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sample->parsed()) return cmd_sample(a);
        if (train->parsed()) return cmd_train(a);
        if (evaluate->parsed()) return run_evaluation(a, methods, remedy, "errors.csv");
        if (predict->parsed()) return cmd_predict(a, point, remedy);
        if (baseline->parsed()) {
            if (methods == std::vector<std::string>{"proposed"})
                methods = {"matrix-interp", "amsallem"};
            return run_evaluation(a, methods, false, "baseline_errors.csv");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
