#pragma once

#include <vector>

#include "commtopo/linalg.hpp"
#include "commtopo/system_model.hpp"

namespace commtopo {

/**
 * Shapes of the identification dataset. The minimum trajectory length for the
 * excitation guarantee is t_min(m_total) = (m_total + 1)(T_ini + N + n_guess) - 1,
 * with n_guess an upper bound on the global state dimension. validate() checks
 * T against that bound; the raw Hankel construction itself only needs
 * T >= T_ini + N.
 */
struct DataConfig {
    int T_ini = 0;   // past-window length
    int N = 0;       // prediction horizon
    int T = 0;       // trajectory length
    int N_coll = 1;  // repeated experiments to average
    int n_guess = 0; // upper bound on the global state dimension

    int t_min(int m_total) const { return (m_total + 1) * (T_ini + N + n_guess) - 1; }
    void validate(int m_total) const;
};

struct BlockRange {
    int offset = 0;
    int size = 0;
};

/**
 * The four subsystem-ordered data matrices. Rows are grouped contiguously by
 * subsystem; inside a group, samples are stacked oldest first. Column t of
 * [U_i^P; U_i^F] reproduces the contiguous input window u_i(t .. t+T_ini+N-1),
 * i.e. past blocks window the first T - N samples at depth T_ini and future
 * blocks window samples T_ini+1 .. T at depth N, sharing the column count
 * L = T - (T_ini + N) + 1.
 */
struct HankelBundle {
    Mat up;  // (T_ini * m_total) x L
    Mat yp;  // (T_ini * p_total) x L
    Mat uf;  // (N * m_total) x L
    Mat yf;  // (N * p_total) x L
    int M = 0, T_ini = 0, N = 0, L = 0;
    std::vector<int> m_sizes, p_sizes;

    int m_total() const;
    int p_total() const;

    BlockRange up_range(int i) const;  // rows of agent i within up
    BlockRange yp_range(int i) const;
    BlockRange uf_range(int i) const;
    BlockRange yf_range(int i) const;

    /// Row ranges of agent i inside the stacked regressor z() = [up; yp; uf].
    BlockRange z_up_range(int i) const;
    BlockRange z_yp_range(int i) const;
    BlockRange z_uf_range(int i) const;
    int z_rows() const;

    Mat z() const;
};

/// Block-Hankel matrix of an n-channel signal: column t holds
/// x(t), ..., x(t+depth-1) stacked. signal is n x T; result is
/// n*depth x (T - depth + 1).
Mat hankel(const Mat& signal, int depth);

HankelBundle build_bundle(const Trajectory& traj, const DataConfig& cfg);

/// Entrywise mean of the output blocks across repeated experiments. The input
/// blocks must match exactly across bundles (identical excitation) and are
/// taken from the first.
HankelBundle average_bundles(const std::vector<HankelBundle>& bundles);

struct PersistencyReport {
    bool ok = false;
    int rank = 0;
    int required = 0;
};

/// Definition check: u (m x T) is persistently exciting of the given order
/// iff rank(H_order(u)) = m * order.
PersistencyReport check_persistency(const Mat& u, int order);

}  // namespace commtopo
