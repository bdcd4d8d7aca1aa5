#pragma once

#include <optional>
#include <vector>

#include "commtopo/data_pipeline.hpp"
#include "commtopo/topology.hpp"

namespace commtopo {

/**
 * Multi-step linear output predictor: y_future = K [u_ini; y_ini; u_future].
 * Columns follow the bundle's stacking (all past inputs by agent, then past
 * outputs, then future inputs); rows are predicted future outputs by agent.
 * When fitted under a topology, blocks of link-less agent pairs are exactly
 * zero (bitwise), never merely small.
 */
class Predictor {
public:
    Predictor() = default;
    Predictor(Mat k, const HankelBundle& shape, std::optional<Topology> structure);

    const Mat& k() const { return k_; }
    int M() const { return M_; }
    int T_ini() const { return T_ini_; }
    int N() const { return N_; }
    const std::vector<int>& m_sizes() const { return m_sizes_; }
    const std::vector<int>& p_sizes() const { return p_sizes_; }
    int m_total() const;
    int p_total() const;
    int rows() const { return static_cast<int>(k_.rows()); }
    int cols() const { return static_cast<int>(k_.cols()); }
    const std::optional<Topology>& structure() const { return structure_; }

    /// Predicted-output rows of agent i.
    BlockRange row_range(int i) const;
    /// Column ranges of agent j's past-input / past-output / future-input data.
    BlockRange col_past_u(int j) const;
    BlockRange col_past_y(int j) const;
    BlockRange col_future_u(int j) const;

    Eigen::Block<const Mat> block_past_u(int i, int j) const;
    Eigen::Block<const Mat> block_past_y(int i, int j) const;
    Eigen::Block<const Mat> block_future(int i, int j) const;

private:
    Mat k_;
    int M_ = 0, T_ini_ = 0, N_ = 0;
    std::vector<int> m_sizes_, p_sizes_;
    std::optional<Topology> structure_;
};

/// One prediction problem: the most recent T_ini inputs/outputs and the next
/// N inputs, each stacked agent-major (agent 0's samples oldest-first, then
/// agent 1's, ...). y_future optionally carries the comparison target.
struct PredictionWindow {
    Vec u_ini;
    Vec y_ini;
    Vec u_future;
    std::optional<Vec> y_future;

    Vec stacked() const;
};

/// Extracts the window starting at time `start` (0-based); y_ini reads the
/// measured outputs, y_future the clean ones when `clean_target` is set.
PredictionWindow window_from_trajectory(const Trajectory& traj, int start, int T_ini, int N,
                                        bool clean_target = true);

/// Minimum-Frobenius-norm least-squares fit K = Y^F [U^P; Y^P; U^F]^+ via SVD.
/// No rank or causality constraint is imposed; structure_diagnostics reports
/// how far the fit is from satisfying them.
Predictor fit_unstructured(const HankelBundle& bundle);

/// Per-agent masked least squares: agent i regresses its future outputs on
/// the data of {i} union its in-neighbors only; all other blocks are zero.
Predictor fit_structured(const HankelBundle& bundle, const Topology& topo);

/// One agent's masked fit against the columns of z belonging to the agents in
/// mask_with_self. This is the single least-squares backend shared by every
/// solver mode, so cross-checks compare bit-identical residuals.
struct MaskedFit {
    Mat k;            // p_i*N x (masked z rows)
    double residual;  // squared Frobenius residual of agent i's rows
};
MaskedFit fit_agent_masked(const HankelBundle& bundle, int agent, uint32_t mask_with_self);

/// Box-constrained variant: off-diagonal entries bounded by +-big_m, the
/// agent's own blocks unconstrained.
MaskedFit fit_agent_masked_box(const HankelBundle& bundle, int agent, uint32_t mask_with_self,
                               double big_m);

/// Rows of z belonging to the agents selected in mask_with_self, preserving
/// the kind-major (past u, past y, future u) ordering.
Mat masked_z(const HankelBundle& bundle, uint32_t mask_with_self);

/// Writes a masked per-agent solution back into full-width coefficient rows;
/// unselected blocks stay exactly zero.
void scatter_masked_fit(Mat& k, const HankelBundle& bundle, int agent, uint32_t mask_with_self,
                        const Mat& k_masked);

Vec predict(const Predictor& k, const PredictionWindow& w);

/// ||Y^F - K Z||_F^2 on the bundle the predictor was fitted to.
double fit_residual(const Predictor& k, const HankelBundle& bundle);
/// Same, restricted to agent i's block rows.
double fit_residual_agent(const Predictor& k, const HankelBundle& bundle, int agent);

/**
 * Out-of-sample prediction quality: simulates a fresh Gaussian-input
 * trajectory under the given noise, slides n_windows evenly spaced windows,
 * predicts each from the noisy history, and returns the mean squared error
 * against the clean future outputs (mean over windows, channels and steps).
 */
double validation_mse(const Predictor& k, const NetworkedSystem& sys, int n_windows,
                      const NoiseSpec& noise, uint64_t seed, double input_variance = 1.0,
                      int T_val = 200);

/// Reported (not enforced) structure of the fit: the numerical rank of the
/// past-data columns [K_p^u K_p^y], and the largest-magnitude entry of K_f
/// above the block diagonal (a causal multi-step predictor has none).
struct StructureDiagnostics {
    int past_rank = 0;
    double max_noncausal = 0.0;
};
StructureDiagnostics structure_diagnostics(const Predictor& k);

}  // namespace commtopo
