// Acceptance suite: one pass/fail line per criterion, selectable with
// --criterion N. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "commtopo/control_loop.hpp"
#include "commtopo/harness.hpp"
#include "commtopo/parallel.hpp"
#include "commtopo/rng.hpp"
#include "commtopo/stats.hpp"
#include "commtopo/topology_optimizer.hpp"

using namespace commtopo;

namespace {

int g_jobs = 2;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        notes.push_back(std::string(ok ? "ok: " : "FAILED: ") + what);
        pass = pass && ok;
    }
    void note(const std::string& what) { notes.push_back("   " + what); }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

const NetworkedSystem& benchmark() {
    static const NetworkedSystem sys = build_swing_benchmark(benchmark_swing_params());
    return sys;
}

constexpr DataConfig kData{3, 5, 200, 50, 8};
const std::vector<double> kCosts{0.001, 1.0, 20.0, 1000.0};

HankelBundle collect_benchmark(uint64_t seed, int n_coll, bool noisy) {
    const Mat u = generate_pe_input(4, kData.T, 1.0, derive_seed(seed, 1));
    std::vector<HankelBundle> raw;
    for (int r = 0; r < n_coll; ++r) {
        const NoiseSpec ns = noisy
                                 ? NoiseSpec::by_snr(1e3, derive_seed(seed, 100 +
                                                                            static_cast<uint64_t>(r)))
                                 : NoiseSpec::noiseless();
        DataConfig cfg = kData;
        cfg.N_coll = n_coll;
        raw.push_back(build_bundle(simulate(benchmark(), u, Vec::Zero(8), ns), cfg));
    }
    return average_bundles(raw);
}

// Per-seed benchmark sweep results shared by criteria 3-5.
struct SeedSweep {
    std::vector<OptimizationResult> results;  // one per cost value
    std::vector<double> mse;                  // matching validation MSE
    HankelBundle bundle;
};

SeedSweep run_seed_sweep(uint64_t seed, bool with_mse) {
    SeedSweep out;
    out.bundle = collect_benchmark(seed, kData.N_coll, true);
    out.results = cost_sweep(out.bundle, kCosts, OptimizerConfig{});
    if (with_mse)
        for (size_t ci = 0; ci < out.results.size(); ++ci)
            out.mse.push_back(validation_mse(out.results[ci].predictor, benchmark(), 50,
                                             NoiseSpec::by_snr(1e3, 0),
                                             derive_seed(seed, 700 + ci)));
    return out;
}

// --- criterion 1 -----------------------------------------------------------

Outcome criterion_1() {
    Outcome o;
    const HankelBundle b = collect_benchmark(42, 1, false);
    const Predictor k = fit_unstructured(b);
    const double residual = fit_residual(k, b);
    o.require(residual <= 1e-8, fmt("unstructured noise-free residual %.3e <= 1e-8", residual));

    const auto full = objective(b, LinkCostMatrix::uniform(4, 0.0), Topology::fully_connected(4));
    o.require(std::abs(full.residual - residual) <= 1e-9,
              fmt("full-topology optimized residual matches to %.3e (<= 1e-9)",
                  std::abs(full.residual - residual)));
    return o;
}

// --- criterion 2 -----------------------------------------------------------

Outcome criterion_2() {
    Outcome o;
    const int n = 100;
    std::vector<int> status(n, 0);  // 1 ok, 2 objective mismatch, 3 argmin mismatch
    std::vector<int> gated(n, 0);
    parallel_for(n, g_jobs, [&](int i) {
        const RandomInstance inst = make_random_instance(1000 + static_cast<uint64_t>(i));
        OptimizerConfig dec;
        OptimizerConfig exh;
        exh.mode = OptimizerConfig::Mode::exhaustive;
        const auto a = optimize(inst.bundle, inst.costs, dec);
        const auto b = optimize(inst.bundle, inst.costs, exh);
        if (a.objective != b.objective) {
            status[static_cast<size_t>(i)] = 2;
            return;
        }
        if (b.second_objective - b.objective > 1e-9) {
            gated[static_cast<size_t>(i)] = 1;
            if (!(a.topology == b.topology)) {
                status[static_cast<size_t>(i)] = 3;
                return;
            }
        }
        status[static_cast<size_t>(i)] = 1;
    });
    int ok = 0, obj_bad = 0, arg_bad = 0, gates = 0;
    for (int i = 0; i < n; ++i) {
        ok += status[static_cast<size_t>(i)] == 1;
        obj_bad += status[static_cast<size_t>(i)] == 2;
        arg_bad += status[static_cast<size_t>(i)] == 3;
        gates += gated[static_cast<size_t>(i)];
    }
    o.require(obj_bad == 0, fmt("objective bit-equality on %d/%d instances", n - obj_bad, n));
    o.require(arg_bad == 0,
              fmt("argmin agreement on all %d instances with top-2 gap > 1e-9", gates));
    return o;
}

// --- criterion 3 -----------------------------------------------------------

Outcome criterion_3() {
    Outcome o;
    const int n_seeds = 50;
    std::vector<SeedSweep> sweeps(static_cast<size_t>(n_seeds));
    parallel_for(n_seeds, g_jobs, [&](int s) {
        sweeps[static_cast<size_t>(s)] = run_seed_sweep(1 + static_cast<uint64_t>(s), true);
    });

    const Topology chain = Topology::from_string("0100;1010;0101;0010");
    int full_at_tiny = 0, exact_chain = 0, physical_only = 0, monotone = 0, mse_order = 0;
    std::vector<double> mean_mse(kCosts.size(), 0.0);
    for (const auto& sw : sweeps) {
        if (sw.results[0].topology.num_links() == 12) ++full_at_tiny;
        if (sw.results[1].topology == chain) ++exact_chain;
        if (sw.results[1].topology.subset_of(chain)) ++physical_only;
        bool mono = true;
        for (size_t ci = 1; ci < sw.results.size(); ++ci)
            mono = mono && sw.results[ci].topology.num_links() <=
                               sw.results[ci - 1].topology.num_links();
        if (mono) ++monotone;
        if (sw.mse[0] < sw.mse[3]) ++mse_order;
        for (size_t ci = 0; ci < kCosts.size(); ++ci) mean_mse[ci] += sw.mse[ci] / n_seeds;
    }

    o.require(full_at_tiny >= 45, fmt("c=0.001 gives 12 links in %d/50 seeds (need >= 45)",
                                      full_at_tiny));
    o.require(exact_chain >= 30,
              fmt("c=1 gives exactly the 6-link physical chain in %d/50 seeds (need >= 30)",
                  exact_chain));
    o.require(physical_only >= 45,
              fmt("c=1 keeps only physical-coupling links in %d/50 seeds (need >= 45)",
                  physical_only));
    o.require(monotone == 50, fmt("link counts non-increasing across costs in %d/50 seeds",
                                  monotone));
    o.require(mse_order == 50,
              fmt("MSE at the densest sweep point < MSE at the sparsest in %d/50 seeds",
                  mse_order));
    const double targets[4] = {0.100, 0.119, 0.457, 1.247};
    for (size_t ci = 0; ci < kCosts.size(); ++ci) {
        const bool in_band =
            mean_mse[ci] >= targets[ci] / 2.0 && mean_mse[ci] <= targets[ci] * 2.0;
        o.require(in_band, fmt("mean MSE at c=%g is %.4f (reference %.3f, factor-2 band)",
                               kCosts[ci], mean_mse[ci], targets[ci]));
    }
    return o;
}

// --- criterion 4 -----------------------------------------------------------

Outcome criterion_4() {
    Outcome o;
    int runs = 0, violations = 0;
    double worst_slack = 0.0;

    auto check = [&](const HankelBundle& b, const LinkCostMatrix& costs,
                     const OptimizationResult& res) {
        const Mat q = Mat::Identity(b.p_total() * b.N, b.p_total() * b.N);
        const BoundsReport rep = bounds_report(b, costs, res, q);
        ++runs;
        if (!(rep.lower_slack >= -1e-9 && rep.upper_slack >= -1e-9)) ++violations;
        worst_slack = std::min({worst_slack, rep.lower_slack, rep.upper_slack});
    };

    // criterion-1 run
    {
        const HankelBundle b = collect_benchmark(42, 1, false);
        const LinkCostMatrix costs = LinkCostMatrix::uniform(4, 0.0);
        check(b, costs, optimize(b, costs, OptimizerConfig{}));
    }
    // criterion-2 instances
    std::vector<std::pair<int, double>> inst_result(100);
    std::vector<double> inst_slacks(100, 0.0);
    std::vector<int> inst_viol(100, 0);
    parallel_for(100, g_jobs, [&](int i) {
        const RandomInstance inst = make_random_instance(1000 + static_cast<uint64_t>(i));
        const auto res = optimize(inst.bundle, inst.costs, OptimizerConfig{});
        const Mat q = Mat::Identity(inst.bundle.p_total() * inst.bundle.N,
                                    inst.bundle.p_total() * inst.bundle.N);
        const BoundsReport rep = bounds_report(inst.bundle, inst.costs, res, q);
        inst_viol[static_cast<size_t>(i)] =
            rep.lower_slack >= -1e-9 && rep.upper_slack >= -1e-9 ? 0 : 1;
        inst_slacks[static_cast<size_t>(i)] = std::min(rep.lower_slack, rep.upper_slack);
    });
    for (int i = 0; i < 100; ++i) {
        ++runs;
        violations += inst_viol[static_cast<size_t>(i)];
        worst_slack = std::min(worst_slack, inst_slacks[static_cast<size_t>(i)]);
    }
    // criterion-3 sweeps
    std::vector<SeedSweep> sweeps(50);
    parallel_for(50, g_jobs, [&](int s) {
        sweeps[static_cast<size_t>(s)] = run_seed_sweep(1 + static_cast<uint64_t>(s), false);
    });
    for (const auto& sw : sweeps)
        for (size_t ci = 0; ci < sw.results.size(); ++ci)
            check(sw.bundle, LinkCostMatrix::uniform(4, kCosts[ci]), sw.results[ci]);

    o.require(violations == 0,
              fmt("bounds sandwich held on %d/%d optimization runs (worst slack %.2e)",
                  runs - violations, runs, worst_slack));
    return o;
}

// --- criterion 5 -----------------------------------------------------------

Outcome criterion_5() {
    Outcome o;
    int cases = 0, violations = 0;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        const SeedSweep sw = run_seed_sweep(seed, false);
        for (size_t ci = 0; ci < sw.results.size(); ++ci) {
            Rng rng(derive_seed(seed, 900 + ci));
            Vec diag(sw.bundle.p_total() * sw.bundle.N);
            for (int i = 0; i < diag.size(); ++i) diag(i) = 0.1 + 3.0 * rng.uniform01();
            const Mat q = diag.asDiagonal();
            const LinkCostMatrix costs = LinkCostMatrix::uniform(4, kCosts[ci]);
            const BoundsReport rep = bounds_report(sw.bundle, costs, sw.results[ci], q);
            const auto chk = check_weighted_error_bound_training(
                sw.results[ci].predictor, sw.bundle, q, rep.weighted_window_bound, 100,
                derive_seed(seed, 950 + ci));
            cases += chk.samples;
            violations += chk.violations;
        }
    }
    o.require(violations == 0,
              fmt("Q-weighted training-column errors within bound in %d/%d cases",
                  cases - violations, cases));
    return o;
}

// --- criterion 6 -----------------------------------------------------------

Outcome criterion_6() {
    Outcome o;
    const std::vector<int> T_values{100, 200, 400};
    const std::vector<int> N_coll_values{1, 10, 50};
    const int trials = 100;

    struct Cell {
        int T, n_coll;
    };
    std::vector<Cell> cells;
    for (int T : T_values)
        for (int nc : N_coll_values) cells.push_back({T, nc});

    std::vector<double> cell_mse(cells.size(), 0.0);
    std::vector<double> trial_mse(cells.size() * trials, 0.0);
    parallel_for(static_cast<int>(cells.size()) * trials, g_jobs, [&](int job) {
        const int ci = job / trials;
        const int trial = job % trials;
        const Cell cell = cells[static_cast<size_t>(ci)];
        const uint64_t seed = derive_seed(31337, static_cast<uint64_t>(job));
        DataConfig cfg = kData;
        cfg.T = cell.T;
        cfg.N_coll = cell.n_coll;
        const Mat u = generate_pe_input(4, cfg.T, 1.0, derive_seed(seed, 1));
        std::vector<HankelBundle> raw;
        for (int r = 0; r < cell.n_coll; ++r)
            raw.push_back(build_bundle(
                simulate(benchmark(), u, Vec::Zero(8),
                         NoiseSpec::by_snr(1e3, derive_seed(seed, 100 + static_cast<uint64_t>(r)))),
                cfg));
        const Predictor k = fit_unstructured(average_bundles(raw));
        trial_mse[static_cast<size_t>(job)] = validation_mse(
            k, benchmark(), 50, NoiseSpec::by_snr(1e3, 0), derive_seed(seed, 9));
        (void)trial;
    });
    for (size_t ci = 0; ci < cells.size(); ++ci) {
        for (int t = 0; t < trials; ++t)
            cell_mse[ci] += trial_mse[ci * static_cast<size_t>(trials) + static_cast<size_t>(t)];
        cell_mse[ci] /= trials;
    }

    std::vector<double> ts, ncs;
    for (const auto& c : cells) {
        ts.push_back(c.T);
        ncs.push_back(c.n_coll);
    }
    const double tau_T = grid_axis_kendall_tau(ts, ncs, cell_mse);
    const double tau_N = grid_axis_kendall_tau(ncs, ts, cell_mse);
    for (size_t ci = 0; ci < cells.size(); ++ci)
        o.note(fmt("T=%-4d N_coll=%-3d mean MSE %.4f", cells[ci].T, cells[ci].n_coll,
                   cell_mse[ci]));
    o.require(tau_T <= -0.5, fmt("Kendall tau along T is %.3f (need <= -0.5)", tau_T));
    o.require(tau_N <= -0.5, fmt("Kendall tau along N_coll is %.3f (need <= -0.5)", tau_N));
    return o;
}

// --- criterion 7 -----------------------------------------------------------

Outcome criterion_7() {
    Outcome o;
    const HankelBundle bundle = collect_benchmark(5, kData.N_coll, true);
    const auto rep =
        communication_value(bundle, benchmark(), kCosts, OptimizerConfig{}, MpcConfig{},
                            NoiseSpec::by_snr(1e3, 0), 10, 20, 424242, g_jobs);

    bool extremes_exact = true;
    bool intermediates_leq = true;
    bool has_extreme_low = false, has_extreme_high = false;
    for (const auto& row : rep.rows) {
        o.note(fmt("c=%-8g links=%2d pred_cost=%9.3f j_opt=%10.3f j_rand=%10.3f ratio=%.4f",
                   row.c_value, row.links, row.pred_cost, row.j_opt, row.j_rand, row.ratio));
        if (row.links == 0 || row.links == 12) {
            extremes_exact = extremes_exact && row.ratio == 1.0;
            (row.links == 0 ? has_extreme_low : has_extreme_high) = true;
        } else {
            intermediates_leq = intermediates_leq && row.ratio <= 1.0;
        }
    }
    o.require(has_extreme_low && has_extreme_high,
              "sweep reaches both the empty and the fully connected topology");
    o.require(extremes_exact, "ratio exactly 1 at 0 and 12 links");
    o.require(intermediates_leq, "mean ratio <= 1.0 at every intermediate link count");
    o.require(rep.min_ratio <= 0.9, fmt("minimum ratio %.4f <= 0.9", rep.min_ratio));
    o.require(rep.spearman_pred_vs_ctrl >= 0.8,
              fmt("Spearman(pred cost, control cost) = %.3f >= 0.8",
                  rep.spearman_pred_vs_ctrl));
    return o;
}

// --- criterion 8 -----------------------------------------------------------

Outcome criterion_8() {
    Outcome o;
    const int n = 1000;
    const int order = kData.T_ini + kData.N + 8;  // 16, with the true state order
    std::vector<int> pass(n, 0);
    parallel_for(n, g_jobs, [&](int i) {
        const Mat u = generate_pe_input(4, kData.T, 1.0, derive_seed(77, static_cast<uint64_t>(i)));
        pass[static_cast<size_t>(i)] = check_persistency(u, order).ok ? 1 : 0;
    });
    int ok = 0;
    for (int v : pass) ok += v;
    o.require(ok >= 990, fmt("gaussian inputs pass the excitation rank check in %d/1000 seeds",
                             ok));

    bool const_fail = true;
    for (double level : {1.0, -2.5, 0.0}) {
        const auto rep = check_persistency(Mat::Constant(4, kData.T, level), order);
        const_fail = const_fail && !rep.ok;
    }
    o.require(const_fail, "constant inputs always fail the rank check");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--criterion") && i + 1 < argc) only = std::atoi(argv[++i]);
        if (!std::strcmp(argv[i], "--jobs") && i + 1 < argc) g_jobs = std::atoi(argv[++i]);
    }

    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
        double budget_s;  // 0 = unbudgeted
    };
    const Entry entries[] = {
        {1, "noise-free exactness", criterion_1, 1.0},
        {2, "oracle equivalence", criterion_2, 60.0},
        {3, "benchmark sweep statistics", criterion_3, 600.0},
        {4, "prediction-error sandwich", criterion_4, 0.0},
        {5, "weighted single-window bound", criterion_5, 0.0},
        {6, "tuning trend", criterion_6, 600.0},
        {7, "closed-loop value of communication", criterion_7, 1200.0},
        {8, "persistency-of-excitation guard", criterion_8, 0.0},
    };

    int failures = 0;
    for (const auto& e : entries) {
        if (only != 0 && e.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o = e.fn();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (e.budget_s > 0.0)
            o.require(secs < e.budget_s, fmt("runtime %.2f s within %.0f s", secs, e.budget_s));
        std::printf("[%s] criterion %d (%s) in %.2f s\n", o.pass ? "PASS" : "FAIL", e.id,
                    e.name, secs);
        for (const auto& note : o.notes) std::printf("    %s\n", note.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures;
}
