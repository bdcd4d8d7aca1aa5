#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "commtopo/control_loop.hpp"
#include "commtopo/data_pipeline.hpp"
#include "commtopo/system_model.hpp"
#include "commtopo/topology_optimizer.hpp"

namespace commtopo {

/**
 * One experiment description, loaded from a JSON config file (see the README
 * for the schema) with optional `--set key.path=value` overrides. Seeds are
 * always explicit; nothing reads the wall clock except the metadata file.
 */
struct ExperimentConfig {
    bool swing = true;
    SwingParams swing_params = benchmark_swing_params();
    std::vector<SubsystemModel> explicit_subsystems;

    DataConfig data{3, 5, 200, 50, 8};
    double excitation_variance = 1.0;
    NoiseSpec noise = NoiseSpec::by_snr(1e3, 0);
    OptimizerConfig optimizer;
    MpcConfig mpc;

    std::vector<double> c_values{0.001, 1.0, 20.0, 1000.0};
    std::vector<int> T_values{100, 200, 400};
    std::vector<int> N_coll_values{1, 10, 50};

    int validation_windows = 50;
    int validation_T = 200;
    int tune_trials = 500;
    int eval_n_random = 10;
    int eval_n_seeds = 20;

    std::vector<uint64_t> seeds{1};
    int jobs = 1;

    NetworkedSystem build_system() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Applies a dotted-path override like "data.T=400" or "seeds=[1,2,3]"; the
/// value part is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& key_eq_value);

/// Generates the excitation, verifies persistency of excitation at order
/// T_ini + N + n_guess, runs N_coll noisy experiments under the identical
/// input, and writes raw + averaged bundles, the first trajectory, a PE
/// report and a metadata file into out_dir. Throws precondition_error when T
/// is below the excitation lower bound or the PE check fails.
void cmd_collect(const ExperimentConfig& cfg, const std::string& out_dir);

/// Optimizes the topology per cost value on an existing bundle, computes the
/// prediction-error bounds and the validation MSE per seed, and writes one
/// JSON result per cost value plus a sweep table. With verify=true the
/// decomposed solve is cross-checked against exhaustive enumeration and a
/// mismatch raises verification_error.
void cmd_optimize(const ExperimentConfig& cfg, const std::string& bundle_base,
                  const std::string& out_dir, bool verify);

/// MSE grid over (T, N_coll): each cell averages `tune_trials` independent
/// collect->fit->validate runs with an all-to-all predictor. Writes the grid
/// CSV and a summary with per-axis Kendall trend statistics.
void cmd_tune(const ExperimentConfig& cfg, const std::string& out_dir);

/// Runs the closed-loop comparison against random topologies and writes the
/// report CSV plus a summary (Spearman correlation, extreme ratios).
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& bundle_base,
                  const std::string& out_dir);

/// Random-instance oracle gate: decomposed-exact vs exhaustive enumeration
/// (and branch-and-bound on the smallest instances). Writes a report; any
/// disagreement raises verification_error.
void cmd_verify(const ExperimentConfig& cfg, const std::string& out_dir, int n_instances);

/// A small random networked system with matching data and costs, used by the
/// oracle gate and the solver cross-check tests.
struct RandomInstance {
    NetworkedSystem sys;
    HankelBundle bundle;
    LinkCostMatrix costs;
    bool noisy = false;
};
RandomInstance make_random_instance(uint64_t seed);

}  // namespace commtopo
