#pragma once

#include <utility>
#include <vector>

#include "commtopo/topology_optimizer.hpp"

namespace commtopo {

/**
 * Regulation-to-zero MPC settings. Each agent penalizes its own predicted
 * outputs (q_weight), inputs (r_weight) and a soft slack on the prediction
 * equation (lambda_s); the local problem is unconstrained and solved in
 * closed form.
 */
struct MpcConfig {
    double q_weight = 1.0;
    // 1e-2 makes inputs cheap enough that predictor mismatch on the swing
    // benchmark's marginal collective mode destabilizes sparse topologies;
    // 0.1 keeps every topology convergent while preserving the cost ordering.
    double r_weight = 0.1;
    double lambda_s = 1e3;
    int T_sim = 100;
    Vec x0;  // empty means zero
};

struct ClosedLoopResult {
    Mat u;        // applied inputs, m_total x T_sim
    Mat y;        // measured outputs
    Mat y_clean;  // outputs without the additive measurement noise
    double cost = 0.0;  // sum_k q||y(k)||^2 + r||u(k)||^2 on measured outputs
    std::vector<double> per_agent_cost;
    double max_slack_norm = 0.0;  // largest ||s_i|| over agents and steps
    bool diverged = false;
    int diverged_step = -1;
    /// Information-flow audit: every (receiver, source) agent pair whose data
    /// entered a local solve. Sources are always {i} union in-neighbors(i).
    std::vector<std::pair<int, int>> info_sources;
};

/// One agent's closed-form local solve, exposed for optimality checks: the
/// decision is [u_future_i; s_i] minimizing
/// q||yhat||^2 + r||u_f,i||^2 + lambda_s||s||^2 with
/// yhat = K_masked (w_fixed + decision slot) + s. The decision occupies
/// columns [own_uf_offset, own_uf_offset + own_uf_size) of the window, which
/// must be zero in w_fixed.
struct AgentSolve {
    Vec u_future;
    Vec slack;
    Vec gradient;  // objective gradient at the solution
};
AgentSolve solve_local_mpc(const Mat& k_masked, const Vec& w_fixed, int own_uf_offset,
                           int own_uf_size, const MpcConfig& cfg);

/**
 * Non-cooperative distributed MPC: at every step each agent solves its local
 * problem from the last T_ini measured inputs/outputs of itself and its
 * in-neighbors, with neighbor future inputs taken from the plans they
 * communicated at the previous step (shifted one step, last entry held).
 * The first input is applied; plans are exchanged over the topology's links
 * only. SNR-calibrated noise uses the std of a clean excitation run so the
 * noise level matches the data-collection regime.
 */
ClosedLoopResult run_mpc(const NetworkedSystem& sys, const Predictor& k, const Topology& topo,
                         const MpcConfig& cfg, const NoiseSpec& noise, uint64_t seed);

/// Uniform sample among off-diagonal boolean matrices with exactly n_links ones.
Topology random_topology(int M, int n_links, uint64_t seed);

struct CommunicationValueRow {
    double c_value = 0.0;
    int links = 0;
    double pred_cost = 0.0;   // optimized fit residual
    double objective = 0.0;   // residual + link cost
    double j_opt = 0.0;       // mean closed-loop cost, optimized topology
    double j_rand = 0.0;      // mean closed-loop cost over random same-size topologies
    double ratio = 0.0;       // j_opt / j_rand
};

struct CommunicationValueReport {
    std::vector<CommunicationValueRow> rows;
    double spearman_pred_vs_ctrl = 0.0;  // across sweep points
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

/**
 * Closed-loop value of the optimized topology versus random topologies with
 * the same link count, over a sweep of uniform link costs. Each seed draws a
 * fresh unit-norm initial state and noise realization, shared between the
 * optimized and random runs so comparisons are paired. Link counts 0 and
 * M(M-1) admit a single support, so their ratio is exactly 1.
 */
CommunicationValueReport communication_value(const HankelBundle& bundle,
                                             const NetworkedSystem& sys,
                                             const std::vector<double>& c_values,
                                             const OptimizerConfig& opt_cfg,
                                             const MpcConfig& mpc_cfg, const NoiseSpec& noise,
                                             int n_random, int n_seeds, uint64_t seed,
                                             int jobs = 1);

}  // namespace commtopo
