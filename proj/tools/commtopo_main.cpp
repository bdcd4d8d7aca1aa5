// Command-line front end: config-driven data collection, topology
// optimization sweeps, hyperparameter tuning grids and closed-loop
// evaluation, with machine-readable CSV/JSON outputs.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "commtopo/errors.hpp"
#include "commtopo/harness.hpp"

using namespace commtopo;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string seeds;
    std::vector<std::string> overrides;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "JSON experiment config");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seeds", args.seeds, "comma-separated seed list override");
    cmd->add_option("--set", args.overrides, "config override key.path=value (repeatable)");
    cmd->add_option("--jobs", args.jobs, "worker threads for independent jobs");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    nlohmann::json j;
    if (!args.config_path.empty()) {
        std::ifstream f(args.config_path);
        if (!f) throw precondition_error("cannot open config: " + args.config_path);
        f >> j;
    } else {
        j = nlohmann::json::object();
    }
    for (const auto& kv : args.overrides) apply_override(j, kv);
    if (!args.seeds.empty()) {
        std::vector<uint64_t> seeds;
        std::string cur;
        for (char ch : args.seeds + ",") {
            if (ch == ',') {
                if (!cur.empty()) seeds.push_back(std::stoull(cur));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        j["seeds"] = seeds;
    }
    ExperimentConfig cfg = config_from_json(j);
    if (args.jobs > 0) cfg.jobs = args.jobs;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-driven communication topology and predictor co-design"};
    app.require_subcommand(1);

    CommonArgs collect_args, optimize_args, tune_args, evaluate_args, verify_args;
    std::string optimize_bundle, evaluate_bundle;
    bool optimize_verify = false;
    int verify_instances = 20;

    auto* collect = app.add_subcommand("collect", "generate excitation and Hankel bundles");
    add_common(collect, collect_args);

    auto* optimize = app.add_subcommand("optimize", "topology/predictor co-design sweep");
    add_common(optimize, optimize_args);
    optimize->add_option("--bundle", optimize_bundle, "bundle base path (from collect)")
        ->required();
    optimize->add_flag("--verify", optimize_verify,
                       "cross-check against exhaustive enumeration");

    auto* tune = app.add_subcommand("tune", "MSE grid over T and N_coll");
    add_common(tune, tune_args);

    auto* evaluate = app.add_subcommand("evaluate", "closed-loop value of communication");
    add_common(evaluate, evaluate_args);
    evaluate->add_option("--bundle", evaluate_bundle, "bundle base path (from collect)")
        ->required();

    auto* verify = app.add_subcommand("verify", "solver oracle gate on random instances");
    add_common(verify, verify_args, false);
    verify->add_option("--instances", verify_instances, "number of random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed()) {
            cmd_collect(resolve_config(collect_args), collect_args.out_dir);
        } else if (optimize->parsed()) {
            cmd_optimize(resolve_config(optimize_args), optimize_bundle, optimize_args.out_dir,
                         optimize_verify);
        } else if (tune->parsed()) {
            cmd_tune(resolve_config(tune_args), tune_args.out_dir);
        } else if (evaluate->parsed()) {
            cmd_evaluate(resolve_config(evaluate_args), evaluate_bundle, evaluate_args.out_dir);
        } else if (verify->parsed()) {
            cmd_verify(resolve_config(verify_args), verify_args.out_dir, verify_instances);
        }
    } catch (const precondition_error& e) {
        std::cerr << "precondition failure: " << e.what() << "\n";
        return 2;
    } catch (const verification_error& e) {
        std::cerr << "verification mismatch: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
