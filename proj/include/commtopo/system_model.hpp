#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "commtopo/linalg.hpp"

namespace commtopo {

/**
 * One subsystem of a networked LTI plant coupled through outputs:
 *
 *   x_i(k+1) = A_i x_i(k) + B_i u_i(k) + sum_j E_ij y_j(k)
 *   y_i(k)   = C_i x_i(k) + D_i u_i(k) + v_i(k)
 *
 * E maps the index j of an influencing subsystem to the n_i x p_j coupling
 * block; absent entries are zero, and E_ii must be absent or zero.
 */
struct SubsystemModel {
    int index = 0;
    Mat A, B, C, D;
    std::map<int, Mat> E;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    int p() const { return static_cast<int>(C.rows()); }
};

struct NoiseSpec {
    enum class Mode { none, white_gaussian_by_snr };
    Mode mode = Mode::none;
    double snr = 0.0;  // var(clean output channel) / var(noise channel)
    uint64_t seed = 0;

    static NoiseSpec noiseless() { return {}; }
    static NoiseSpec by_snr(double snr, uint64_t seed) {
        return {Mode::white_gaussian_by_snr, snr, seed};
    }
};

/// Input/output records of one experiment; columns are time steps and rows
/// are stacked in subsystem index order. y holds the measured (noisy)
/// outputs, y_clean the same recursion without the additive measurement noise.
struct Trajectory {
    Mat u;        // m_total x T
    Mat y;        // p_total x T
    Mat y_clean;  // p_total x T
    std::vector<int> m_sizes, p_sizes;

    int length() const { return static_cast<int>(u.cols()); }
    int m_total() const { return static_cast<int>(u.rows()); }
    int p_total() const { return static_cast<int>(y.rows()); }
    Eigen::Block<const Mat> u_block(int i) const;
    Eigen::Block<const Mat> y_block(int i) const;
    Eigen::Block<const Mat> y_clean_block(int i) const;
};

/**
 * Global assembly of M subsystems. The global state matrix carries A_i on the
 * block diagonal and E_ij C_j off it; the input matrix carries B_i and
 * E_ij D_j; C and D are block diagonal. Observability of (A, C) and
 * controllability of (A, B) are checked numerically at construction.
 */
class NetworkedSystem {
public:
    explicit NetworkedSystem(std::vector<SubsystemModel> subsystems);

    int num_subsystems() const { return static_cast<int>(subs_.size()); }
    int n_total() const { return n_total_; }
    int m_total() const { return m_total_; }
    int p_total() const { return p_total_; }

    const Mat& A() const { return A_; }
    const Mat& B() const { return B_; }
    const Mat& C() const { return C_; }
    const Mat& D() const { return D_; }
    /// Global n x p matrix of E_ij blocks (zero block diagonal); multiplies
    /// the measurement noise when couplings read the measured outputs.
    const Mat& coupling() const { return E_; }

    const SubsystemModel& subsystem(int i) const { return subs_.at(static_cast<size_t>(i)); }
    int n_of(int i) const { return subs_[static_cast<size_t>(i)].n(); }
    int m_of(int i) const { return subs_[static_cast<size_t>(i)].m(); }
    int p_of(int i) const { return subs_[static_cast<size_t>(i)].p(); }
    int x_offset(int i) const { return x_off_[static_cast<size_t>(i)]; }
    int u_offset(int i) const { return u_off_[static_cast<size_t>(i)]; }
    int y_offset(int i) const { return y_off_[static_cast<size_t>(i)]; }

    std::vector<int> m_sizes() const;
    std::vector<int> p_sizes() const;

    int observability_rank() const { return obs_rank_; }
    int controllability_rank() const { return ctrl_rank_; }

private:
    std::vector<SubsystemModel> subs_;
    Mat A_, B_, C_, D_, E_;
    int n_total_ = 0, m_total_ = 0, p_total_ = 0;
    std::vector<int> x_off_, u_off_, y_off_;
    int obs_rank_ = 0, ctrl_rank_ = 0;
};

/// Linearized discrete-time swing dynamics: per node, state [angle; frequency],
/// force input, measured angle. coupling(i, j) is the stiffness k_ij between
/// nodes (diagonal ignored); k_i = sum_{j != i} k_ij enters the local A block.
struct SwingParams {
    std::vector<double> inertia;  // m_i > 0
    std::vector<double> damping;  // d_i
    Mat coupling;                 // M x M, k_ij >= 0
    double dt = 0.0;
};

NetworkedSystem build_swing_benchmark(const SwingParams& params);

/// The 4-node benchmark configuration used throughout the test suite.
SwingParams benchmark_swing_params();

/**
 * Simulates y(k) = C x(k) + D u(k) + v(k), x(k+1) = A x(k) + B u(k) + E v(k).
 * The E v(k) term propagates measurement noise into the couplings, matching
 * subsystems that read their neighbors' measured outputs. For SNR-calibrated
 * noise, per-channel noise std is sqrt(var(clean channel)/snr) with the clean
 * variance taken from a preliminary noise-free pass over the same input.
 * Throws divergence_error when the recursion leaves the finite range.
 */
Trajectory simulate(const NetworkedSystem& sys, const Mat& u, const Vec& x0,
                    const NoiseSpec& noise);

/// i.i.d. zero-mean Gaussian excitation, one row per input channel.
Mat generate_pe_input(int m_total, int T, double variance, uint64_t seed);

}  // namespace commtopo
