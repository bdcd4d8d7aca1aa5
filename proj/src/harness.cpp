#include "commtopo/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "commtopo/errors.hpp"
#include "commtopo/io.hpp"
#include "commtopo/parallel.hpp"
#include "commtopo/rng.hpp"
#include "commtopo/stats.hpp"

namespace commtopo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Mat matrix_from_json(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Mat(0, 0);
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw precondition_error("config: ragged matrix literal");
        for (size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw precondition_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw precondition_error("cannot open for reading: " + path);
    json j;
    f >> j;
    return j;
}

}  // namespace

NetworkedSystem ExperimentConfig::build_system() const {
    if (swing) return build_swing_benchmark(swing_params);
    return NetworkedSystem(explicit_subsystems);
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("system")) {
        const auto& s = j.at("system");
        const std::string type = s.value("type", "swing");
        if (type == "swing") {
            cfg.swing = true;
            if (s.contains("inertia"))
                cfg.swing_params.inertia = s.at("inertia").get<std::vector<double>>();
            if (s.contains("damping"))
                cfg.swing_params.damping = s.at("damping").get<std::vector<double>>();
            if (s.contains("coupling"))
                cfg.swing_params.coupling = matrix_from_json(s.at("coupling"));
            if (s.contains("dt")) cfg.swing_params.dt = s.at("dt").get<double>();
        } else if (type == "explicit") {
            cfg.swing = false;
            for (const auto& sub : s.at("subsystems")) {
                SubsystemModel m;
                m.A = matrix_from_json(sub.at("A"));
                m.B = matrix_from_json(sub.at("B"));
                m.C = matrix_from_json(sub.at("C"));
                m.D = matrix_from_json(sub.at("D"));
                if (sub.contains("E"))
                    for (const auto& [key, val] : sub.at("E").items())
                        m.E[std::stoi(key)] = matrix_from_json(val);
                cfg.explicit_subsystems.push_back(std::move(m));
            }
        } else {
            throw precondition_error("config: unknown system type '" + type + "'");
        }
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        cfg.data.T_ini = d.value("T_ini", cfg.data.T_ini);
        cfg.data.N = d.value("N", cfg.data.N);
        cfg.data.T = d.value("T", cfg.data.T);
        cfg.data.N_coll = d.value("N_coll", cfg.data.N_coll);
        cfg.data.n_guess = d.value("n_guess", cfg.data.n_guess);
    }
    if (j.contains("excitation"))
        cfg.excitation_variance = j.at("excitation").value("variance", cfg.excitation_variance);
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        const std::string mode = n.value("mode", "by-snr");
        if (mode == "none")
            cfg.noise = NoiseSpec::noiseless();
        else if (mode == "by-snr")
            cfg.noise = NoiseSpec::by_snr(n.value("snr", 1e3), 0);
        else
            throw precondition_error("config: unknown noise mode '" + mode + "'");
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        const std::string mode = o.value("mode", "decomposed-exact");
        if (mode == "decomposed-exact")
            cfg.optimizer.mode = OptimizerConfig::Mode::decomposed_exact;
        else if (mode == "exhaustive")
            cfg.optimizer.mode = OptimizerConfig::Mode::exhaustive;
        else if (mode == "branch-and-bound")
            cfg.optimizer.mode = OptimizerConfig::Mode::branch_and_bound;
        else
            throw precondition_error("config: unknown optimizer mode '" + mode + "'");
        cfg.optimizer.big_m = o.value("big_m", cfg.optimizer.big_m);
        cfg.optimizer.tie_tol = o.value("tie_tol", cfg.optimizer.tie_tol);
    }
    if (j.contains("mpc")) {
        const auto& m = j.at("mpc");
        cfg.mpc.q_weight = m.value("q_weight", cfg.mpc.q_weight);
        cfg.mpc.r_weight = m.value("r_weight", cfg.mpc.r_weight);
        cfg.mpc.lambda_s = m.value("lambda_s", cfg.mpc.lambda_s);
        cfg.mpc.T_sim = m.value("T_sim", cfg.mpc.T_sim);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (s.contains("c_values")) cfg.c_values = s.at("c_values").get<std::vector<double>>();
        if (s.contains("T_values")) cfg.T_values = s.at("T_values").get<std::vector<int>>();
        if (s.contains("N_coll_values"))
            cfg.N_coll_values = s.at("N_coll_values").get<std::vector<int>>();
    }
    if (j.contains("validation")) {
        cfg.validation_windows = j.at("validation").value("n_windows", cfg.validation_windows);
        cfg.validation_T = j.at("validation").value("T_val", cfg.validation_T);
    }
    if (j.contains("tune")) cfg.tune_trials = j.at("tune").value("trials", cfg.tune_trials);
    if (j.contains("evaluate")) {
        cfg.eval_n_random = j.at("evaluate").value("n_random", cfg.eval_n_random);
        cfg.eval_n_seeds = j.at("evaluate").value("n_seeds", cfg.eval_n_seeds);
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (cfg.seeds.empty()) throw precondition_error("config: seeds must be nonempty");
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(read_json_file(path));
}

void apply_override(json& j, const std::string& key_eq_value) {
    const auto eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw precondition_error("--set expects key.path=value, got '" + key_eq_value + "'");
    const std::string key = key_eq_value.substr(0, eq);
    const std::string value = key_eq_value.substr(eq + 1);
    std::string pointer = "/";
    for (char ch : key) pointer += ch == '.' ? '/' : ch;
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    j[json::json_pointer(pointer)] = parsed;
}

namespace {

struct CollectedData {
    Mat input;
    std::vector<Trajectory> runs;
    std::vector<HankelBundle> raw;
    HankelBundle averaged;
    PersistencyReport pe;
};

CollectedData collect_dataset(const NetworkedSystem& sys, const DataConfig& data,
                              double excitation_variance, const NoiseSpec& noise,
                              uint64_t seed) {
    CollectedData out;
    out.input = generate_pe_input(sys.m_total(), data.T, excitation_variance,
                                  derive_seed(seed, 1));
    out.pe = check_persistency(out.input, data.T_ini + data.N + data.n_guess);
    const Vec x0 = Vec::Zero(sys.n_total());
    for (int r = 0; r < data.N_coll; ++r) {
        NoiseSpec run_noise = noise;
        run_noise.seed = derive_seed(seed, 100 + static_cast<uint64_t>(r));
        out.runs.push_back(simulate(sys, out.input, x0, run_noise));
        out.raw.push_back(build_bundle(out.runs.back(), data));
    }
    out.averaged = average_bundles(out.raw);
    return out;
}

}  // namespace

void cmd_collect(const ExperimentConfig& cfg, const std::string& out_dir) {
    const NetworkedSystem sys = cfg.build_system();
    cfg.data.validate(sys.m_total());
    fs::create_directories(out_dir);

    const uint64_t seed = cfg.seeds.front();
    const CollectedData data =
        collect_dataset(sys, cfg.data, cfg.excitation_variance, cfg.noise, seed);

    json pe;
    pe["ok"] = data.pe.ok;
    pe["rank"] = data.pe.rank;
    pe["required"] = data.pe.required;
    pe["order"] = cfg.data.T_ini + cfg.data.N + cfg.data.n_guess;
    write_json_file(pe, out_dir + "/pe_report.json");

    if (!data.pe.ok)
        throw precondition_error("collect: input is not persistently exciting (rank " +
                                 std::to_string(data.pe.rank) + " < " +
                                 std::to_string(data.pe.required) + "); see pe_report.json");

    save_trajectory_csv(data.runs.front(), out_dir + "/trajectory_000.csv");
    for (size_t r = 0; r < data.raw.size(); ++r) {
        char name[32];
        std::snprintf(name, sizeof(name), "/bundle_raw_%03zu", r);
        save_bundle(data.raw[r], out_dir + name);
    }
    save_bundle(data.averaged, out_dir + "/bundle_avg");

    json meta;
    meta["seed"] = seed;
    meta["N_coll"] = cfg.data.N_coll;
    meta["T"] = cfg.data.T;
    meta["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
    write_json_file(meta, out_dir + "/meta.json");
}

void cmd_optimize(const ExperimentConfig& cfg, const std::string& bundle_base,
                  const std::string& out_dir, bool verify) {
    const HankelBundle bundle = load_bundle(bundle_base);
    const NetworkedSystem sys = cfg.build_system();
    fs::create_directories(out_dir);

    const Mat q_eye = Mat::Identity(bundle.p_total() * bundle.N, bundle.p_total() * bundle.N);
    std::vector<SweepRow> rows;
    int idx = 0;
    for (double c : cfg.c_values) {
        const LinkCostMatrix costs = LinkCostMatrix::uniform(bundle.M, c);
        OptimizationResult res = optimize(bundle, costs, cfg.optimizer);
        res.c_value = c;
        const BoundsReport bounds = bounds_report(bundle, costs, res, q_eye);

        if (verify) {
            OptimizerConfig oracle_cfg = cfg.optimizer;
            oracle_cfg.mode = OptimizerConfig::Mode::exhaustive;
            const OptimizationResult oracle = optimize(bundle, costs, oracle_cfg);
            if (oracle.objective != res.objective)
                throw verification_error(
                    "optimize: decomposed objective " + format_double(res.objective) +
                    " != exhaustive objective " + format_double(oracle.objective) +
                    " at c = " + format_double(c));
            if (oracle.second_objective - oracle.objective > cfg.optimizer.tie_tol &&
                !(oracle.topology == res.topology))
                throw verification_error("optimize: solver topologies disagree at c = " +
                                         format_double(c));
        }

        char name[32];
        std::snprintf(name, sizeof(name), "/result_%03d.json", idx);
        save_result_json(res, bounds, out_dir + name);

        for (uint64_t seed : cfg.seeds) {
            SweepRow row;
            row.c = c;
            row.links = res.topology.num_links();
            row.topology = res.topology.to_string();
            row.pred_cost = res.residual;
            row.objective = res.objective;
            row.mse = validation_mse(res.predictor, sys, cfg.validation_windows, cfg.noise,
                                     derive_seed(seed, 500 + static_cast<uint64_t>(idx)),
                                     cfg.excitation_variance, cfg.validation_T);
            row.seed = seed;
            rows.push_back(std::move(row));
        }
        ++idx;
    }
    save_sweep_csv(rows, out_dir + "/sweep.csv");

    std::ofstream summary(out_dir + "/summary.txt");
    summary << "cost sweep over " << cfg.c_values.size() << " value(s), "
            << cfg.seeds.size() << " seed(s)\n";
    for (const auto& r : rows)
        summary << "c=" << format_double(r.c) << " links=" << r.links << " topology="
                << r.topology << " pred_cost=" << format_double(r.pred_cost)
                << " objective=" << format_double(r.objective)
                << " mse=" << format_double(r.mse) << " seed=" << r.seed << "\n";
}

void cmd_tune(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.T_values.empty() || cfg.N_coll_values.empty())
        throw precondition_error("tune: T_values and N_coll_values must be nonempty");
    const NetworkedSystem sys = cfg.build_system();
    fs::create_directories(out_dir);

    struct Cell {
        int T, N_coll;
        double mse_sum = 0.0;
    };
    std::vector<Cell> cells;
    for (int T : cfg.T_values)
        for (int nc : cfg.N_coll_values) cells.push_back({T, nc, 0.0});

    const int trials = cfg.tune_trials;
    const uint64_t seed = cfg.seeds.front();
    std::vector<double> trial_mse(cells.size() * static_cast<size_t>(trials), 0.0);

    parallel_for(static_cast<int>(cells.size()) * trials, cfg.jobs, [&](int job) {
        const int ci = job / trials;
        const int trial = job % trials;
        const Cell& cell = cells[static_cast<size_t>(ci)];
        DataConfig d = cfg.data;
        d.T = cell.T;
        d.N_coll = cell.N_coll;
        const uint64_t trial_seed =
            derive_seed(seed, static_cast<uint64_t>(ci) * 100000u + static_cast<uint64_t>(trial));
        const CollectedData data =
            collect_dataset(sys, d, cfg.excitation_variance, cfg.noise, trial_seed);
        const Predictor k = fit_unstructured(data.averaged);
        trial_mse[static_cast<size_t>(job)] =
            validation_mse(k, sys, cfg.validation_windows, cfg.noise,
                           derive_seed(trial_seed, 9), cfg.excitation_variance,
                           cfg.validation_T);
    });
    for (size_t ci = 0; ci < cells.size(); ++ci)
        for (int t = 0; t < trials; ++t)
            cells[ci].mse_sum += trial_mse[ci * static_cast<size_t>(trials) +
                                           static_cast<size_t>(t)];

    std::ofstream f(out_dir + "/tune.csv");
    if (!f) throw precondition_error("cannot open for writing: " + out_dir + "/tune.csv");
    f << "T,N_coll,mse,trials\n";
    std::vector<double> ts, ncs, mses;
    for (const auto& cell : cells) {
        const double mse = cell.mse_sum / trials;
        f << cell.T << "," << cell.N_coll << "," << format_double(mse) << "," << trials << "\n";
        ts.push_back(cell.T);
        ncs.push_back(cell.N_coll);
        mses.push_back(mse);
    }

    // Per-axis monotone trend: pairs that differ only along one axis.
    const double tau_T = grid_axis_kendall_tau(ts, ncs, mses);
    const double tau_N = grid_axis_kendall_tau(ncs, ts, mses);

    json summary;
    summary["kendall_tau_T"] = tau_T;
    summary["kendall_tau_N_coll"] = tau_N;
    summary["p_value_T"] = kendall_tau_pvalue(tau_T, static_cast<int>(cfg.T_values.size() *
                                                                      cfg.N_coll_values.size()));
    summary["p_value_N_coll"] = kendall_tau_pvalue(
        tau_N, static_cast<int>(cfg.T_values.size() * cfg.N_coll_values.size()));
    summary["trials"] = trials;
    write_json_file(summary, out_dir + "/tune_summary.json");
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& bundle_base,
                  const std::string& out_dir) {
    const HankelBundle bundle = load_bundle(bundle_base);
    const NetworkedSystem sys = cfg.build_system();
    fs::create_directories(out_dir);

    const CommunicationValueReport rep = communication_value(
        bundle, sys, cfg.c_values, cfg.optimizer, cfg.mpc, cfg.noise, cfg.eval_n_random,
        cfg.eval_n_seeds, cfg.seeds.front(), cfg.jobs);

    save_communication_value_csv(rep, out_dir + "/communication_value.csv");
    json summary;
    summary["spearman_pred_vs_ctrl"] = rep.spearman_pred_vs_ctrl;
    summary["min_ratio"] = rep.min_ratio;
    summary["max_ratio"] = rep.max_ratio;
    summary["n_seeds"] = cfg.eval_n_seeds;
    summary["n_random"] = cfg.eval_n_random;
    json ratios = json::array();
    for (const auto& r : rep.rows) ratios.push_back({{"links", r.links}, {"ratio", r.ratio}});
    summary["ratios"] = ratios;
    write_json_file(summary, out_dir + "/evaluate_summary.json");

    std::ofstream txt(out_dir + "/summary.txt");
    txt << "closed-loop value of communication (" << cfg.eval_n_seeds << " seed(s), "
        << cfg.eval_n_random << " random topologies per point)\n";
    for (const auto& r : rep.rows)
        txt << "c=" << format_double(r.c_value) << " links=" << r.links
            << " pred_cost=" << format_double(r.pred_cost)
            << " j_opt=" << format_double(r.j_opt) << " j_rand=" << format_double(r.j_rand)
            << " ratio=" << format_double(r.ratio) << "\n";
    txt << "spearman(pred_cost, j_opt) = " << format_double(rep.spearman_pred_vs_ctrl)
        << "\nmin ratio = " << format_double(rep.min_ratio) << "\n";
}

RandomInstance make_random_instance(uint64_t seed) {
    for (int attempt = 0;; ++attempt) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(attempt)));
        const int M = 2 + rng.uniform_int(3);
        std::vector<SubsystemModel> subs(static_cast<size_t>(M));
        int n_total = 0;
        for (auto& s : subs) {
            const int n = 1 + rng.uniform_int(2);
            n_total += n;
            s.A.resize(n, n);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) s.A(r, c) = 2.0 * rng.uniform01() - 1.0;
            Eigen::EigenSolver<Mat> es(s.A);
            const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
            if (rho > 0.0) s.A *= (0.5 + 0.3 * rng.uniform01()) / rho;
            s.B.resize(n, 1);
            for (int r = 0; r < n; ++r) s.B(r, 0) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) *
                                                    (0.5 + rng.uniform01());
            s.C.resize(1, n);
            for (int c = 0; c < n; ++c) s.C(0, c) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) *
                                                    (0.5 + rng.uniform01());
            s.D = Mat::Constant(1, 1, rng.uniform01() < 0.25 ? 0.2 * rng.uniform01() : 0.0);
        }
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) {
                if (i == j || rng.uniform01() < 0.5) continue;
                Mat e(subs[static_cast<size_t>(i)].n(), 1);
                for (int r = 0; r < e.rows(); ++r)
                    e(r, 0) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) *
                              (0.05 + 0.15 * rng.uniform01());
                subs[static_cast<size_t>(i)].E[j] = e;
            }

        try {
            NetworkedSystem sys(subs);
            Eigen::EigenSolver<Mat> es(sys.A());
            if (es.eigenvalues().cwiseAbs().maxCoeff() > 0.98) continue;

            DataConfig data;
            data.T_ini = 2;
            data.N = 2;
            data.N_coll = 1;
            data.n_guess = n_total;
            data.T = std::max(data.t_min(sys.m_total()), 50) + 5;

            const bool noisy = rng.uniform01() < 0.5;
            NoiseSpec noise = noisy
                                  ? NoiseSpec::by_snr(rng.uniform01() < 0.5 ? 100.0 : 1000.0,
                                                      derive_seed(seed, 333))
                                  : NoiseSpec::noiseless();
            const Mat u = generate_pe_input(sys.m_total(), data.T, 1.0, derive_seed(seed, 222));
            const Trajectory traj = simulate(sys, u, Vec::Zero(sys.n_total()), noise);

            RandomInstance inst{sys, build_bundle(traj, data), LinkCostMatrix{}, noisy};
            inst.costs.c = Mat::Zero(M, M);
            const bool uniform = rng.uniform01() < 0.25;
            const double uc = 2.0 * rng.uniform01();
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j)
                    if (i != j) inst.costs.c(i, j) = uniform ? uc : 2.0 * rng.uniform01();
            return inst;
        } catch (const precondition_error&) {
            continue;  // resample until the rank checks pass
        }
    }
}

void cmd_verify(const ExperimentConfig& cfg, const std::string& out_dir, int n_instances) {
    if (n_instances < 1) throw precondition_error("verify: n_instances must be >= 1");
    fs::create_directories(out_dir);

    int argmin_checked = 0;
    for (int k = 0; k < n_instances; ++k) {
        const RandomInstance inst =
            make_random_instance(derive_seed(cfg.seeds.front(), static_cast<uint64_t>(k)));
        OptimizerConfig dec = cfg.optimizer;
        dec.mode = OptimizerConfig::Mode::decomposed_exact;
        OptimizerConfig exh = cfg.optimizer;
        exh.mode = OptimizerConfig::Mode::exhaustive;
        const OptimizationResult a = optimize(inst.bundle, inst.costs, dec);
        const OptimizationResult b = optimize(inst.bundle, inst.costs, exh);
        if (a.objective != b.objective)
            throw verification_error("verify: objective mismatch on instance " +
                                     std::to_string(k) + " (" + format_double(a.objective) +
                                     " vs " + format_double(b.objective) + ")");
        if (b.second_objective - b.objective > cfg.optimizer.tie_tol) {
            ++argmin_checked;
            if (!(a.topology == b.topology))
                throw verification_error("verify: argmin mismatch on instance " +
                                         std::to_string(k));
        }
    }

    json rep;
    rep["instances"] = n_instances;
    rep["argmin_checked"] = argmin_checked;
    rep["ok"] = true;
    write_json_file(rep, out_dir + "/verify_report.json");
}

}  // namespace commtopo
