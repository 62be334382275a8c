#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "pmint/io.hpp"
#include "pmint/prom.hpp"
#include "pmint/sampling.hpp"

namespace pmint {

inline ParametricFom make_fom(const ExperimentConfig& c) {
    BeamSpec bs;
    bs.n_elements = c.n_elements;
    KelvinCellSpec ks;
    ks.elements_per_strut = c.elements_per_strut;
    if (c.rayleigh_alpha >= 0.0) bs.rayleigh_alpha = ks.rayleigh_alpha = c.rayleigh_alpha;
    if (c.rayleigh_beta >= 0.0) bs.rayleigh_beta = ks.rayleigh_beta = c.rayleigh_beta;
    ParametricFom fom(c.fam(), bs, ks);
    FamilyBox fb;
    fb.lower = c.box().lower;
    fb.upper = c.box().upper;
    fom.set_box(fb);
    return fom;
}

inline RomEvaluator make_rom_evaluator(const ExperimentConfig& c) {
    auto fom = std::make_shared<ParametricFom>(make_fom(c));
    const Index r = c.r, m = c.modes();
    const ModeSelection sel =
        c.selection == "lowest" ? ModeSelection::lowest : ModeSelection::dominant;
    return [fom, r, m, sel](const Vec& p) {
        const SystemMatrices sys = (*fom)(p);
        const ModalData md = solve_modes(sys, m);
        ReducedModel rm = reduce(sys, modal_basis(md, select_modes(md, sys, r, sel)));
        rm.p = p;
        return rm;
    };
}

/// The 2^d corner points of the box in physical coordinates.
inline std::vector<Vec> corner_points(const ParamBox& box) {
    const int d = box.dim();
    std::vector<Vec> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
        Vec p(d);
        for (int k = 0; k < d; ++k) p[k] = (mask >> k) & 1 ? box.upper[k] : box.lower[k];
        out.push_back(p);
    }
    return out;
}

/// Full offline stage: adaptive sampling from the box corners, clustering,
/// border probing, region filling and gap filling.
inline SampleLibrary run_sampling(const ExperimentConfig& c, const RomEvaluator& rom) {
    SampleLibrary lib = adaptive_sample(rom, c.box(), corner_points(c.box()), c.hp);
    finalize_regions(lib, rom);
    return lib;
}

/// Normalized test-grid points in row-major order (last dimension fastest).
inline std::vector<Vec> test_grid(const ExperimentConfig& c) {
    const int d = c.box().dim();
    std::vector<int> counts = c.grid;
    if (counts.empty()) counts.assign(d, d == 1 ? 200 : (d == 2 ? 21 : 7));
    std::vector<Vec> out;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec p(d);
        for (int k = 0; k < d; ++k)
            p[k] = counts[k] == 1 ? 0.5 : (double)idx[k] / (counts[k] - 1);
        out.push_back(p);
        int k = d - 1;
        while (k >= 0 && ++idx[k] == counts[k]) idx[k--] = 0;
        if (k < 0) break;
    }
    return out;
}

struct EvalOptions {
    std::vector<std::string> methods = {"proposed"};
    bool remedy = false;  // reroute indicator-flagged points to the global basis
    int workers = 1;
};

struct EvalResult {
    std::vector<ErrorRow> rows;           // grid-ordered, grouped by point
    std::vector<IndicatorRow> indicator;  // one per test point
    double fom_seconds = 0.0;             // cumulative full-model solve time
    double predict_seconds = 0.0;         // cumulative online prediction time
};

/// Relative H2 errors of the requested methods over the test grid. The full
/// model is assembled and solved once per point and shared by all methods.
inline EvalResult evaluate_grid(const ExperimentConfig& c, const SampleLibrary& lib,
                                const PromSet& set, const EvalOptions& opt) {
    const ParametricFom fom = make_fom(c);
    const Vec freqs = frequency_grid(c.f_lo_hz, c.f_hi_hz, c.f_count);
    const InterpKind kind = interp_kind_from_string(c.interp);
    const std::vector<Vec> grid = test_grid(c);
    const int d = c.box().dim();

    std::optional<LocalProm> mi_base, am_base;
    std::string am_failure;
    for (const auto& m : opt.methods) {
        if (m == "matrix-interp" && !mi_base)
            mi_base = baseline_matrix_interp_train(lib, kind, c.lambda);
        if (m == "amsallem" && !am_base) {
            try {
                am_base = baseline_amsallem_train(lib, kind, c.lambda);
            } catch (const NumericError& e) {
                am_failure = e.what();
            }
        }
    }

    EvalResult res;
    const size_t nm = opt.methods.size();
    res.rows.resize(grid.size() * nm);
    res.indicator.resize(grid.size());
    std::atomic<size_t> cursor{0};
    std::mutex time_mutex;

    auto worker = [&]() {
        double fom_s = 0.0, pred_s = 0.0;
        while (true) {
            const size_t i = cursor.fetch_add(1);
            if (i >= grid.size()) break;
            const Vec p_norm = grid[i];
            const Vec p_phys = lib.box.denormalize(p_norm);

            auto t0 = std::chrono::steady_clock::now();
            const SystemMatrices sys = fom(p_phys);
            const CVec H = transfer_function(sys, freqs);
            fom_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();

            const IndicatorResult ind = inconsistency_indicator(set, lib, p_norm);
            IndicatorRow irow;
            irow.p = p_phys;
            irow.indicator = ind.count;
            irow.extrapolated = ind.extrapolated;

            for (size_t mth = 0; mth < nm; ++mth) {
                ErrorRow row;
                row.p = p_phys;
                row.method = opt.methods[mth];
                auto t1 = std::chrono::steady_clock::now();
                try {
                    CVec Hr;
                    if (row.method == "proposed") {
                        if (opt.remedy && ind.count > 0) {
                            Hr = transfer_function(global_basis_reduce(sys, lib, p_norm),
                                                   freqs);
                            irow.remedy_used = true;
                            row.note = "remedy";
                        } else {
                            Hr = transfer_function(predict(set, p_norm).rm, freqs);
                        }
                    } else if (row.method == "global-remedy") {
                        if (ind.count > 0) {
                            Hr = transfer_function(global_basis_reduce(sys, lib, p_norm),
                                                   freqs);
                            irow.remedy_used = true;
                        } else {
                            Hr = transfer_function(predict(set, p_norm).rm, freqs);
                        }
                    } else if (row.method == "matrix-interp") {
                        Hr = transfer_function(mi_base->evaluate(p_norm).rm, freqs);
                    } else if (row.method == "amsallem") {
                        if (!am_base) throw NumericError(am_failure);
                        Hr = transfer_function(am_base->evaluate(p_norm).rm, freqs);
                    } else {
                        throw ConfigError("unknown method: " + row.method);
                    }
                    row.h2_rel = relative_h2_error(H, Hr, freqs, c.h2_squared);
                } catch (const NumericError& e) {
                    row.h2_rel = std::nan("");
                    row.note = e.what();
                }
                pred_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
                              .count();
                res.rows[i * nm + mth] = std::move(row);
            }
            res.indicator[i] = std::move(irow);
        }
        std::lock_guard<std::mutex> lk(time_mutex);
        res.fom_seconds += fom_s;
        res.predict_seconds += pred_s;
    };

    const int n_workers = std::max(1, std::min<int>(opt.workers, (int)grid.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return res;
}

}  // namespace pmint
