#include "commtopo/predictor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "commtopo/errors.hpp"
#include "commtopo/rng.hpp"

namespace commtopo {

namespace {

int total_of(const std::vector<int>& sizes) {
    return std::accumulate(sizes.begin(), sizes.end(), 0);
}

}  // namespace

Predictor::Predictor(Mat k, const HankelBundle& shape, std::optional<Topology> structure)
    : k_(std::move(k)),
      M_(shape.M),
      T_ini_(shape.T_ini),
      N_(shape.N),
      m_sizes_(shape.m_sizes),
      p_sizes_(shape.p_sizes),
      structure_(std::move(structure)) {
    if (k_.rows() != shape.p_total() * N_ || k_.cols() != shape.z_rows())
        throw precondition_error("Predictor: matrix does not match the bundle shape");
    if (structure_ && structure_->size() != M_)
        throw precondition_error("Predictor: topology size does not match");
}

int Predictor::m_total() const { return total_of(m_sizes_); }
int Predictor::p_total() const { return total_of(p_sizes_); }

BlockRange Predictor::row_range(int i) const {
    int off = 0;
    for (int j = 0; j < i; ++j) off += p_sizes_[static_cast<size_t>(j)] * N_;
    return {off, p_sizes_[static_cast<size_t>(i)] * N_};
}

BlockRange Predictor::col_past_u(int j) const {
    int off = 0;
    for (int a = 0; a < j; ++a) off += m_sizes_[static_cast<size_t>(a)] * T_ini_;
    return {off, m_sizes_[static_cast<size_t>(j)] * T_ini_};
}

BlockRange Predictor::col_past_y(int j) const {
    int off = m_total() * T_ini_;
    for (int a = 0; a < j; ++a) off += p_sizes_[static_cast<size_t>(a)] * T_ini_;
    return {off, p_sizes_[static_cast<size_t>(j)] * T_ini_};
}

BlockRange Predictor::col_future_u(int j) const {
    int off = (m_total() + p_total()) * T_ini_;
    for (int a = 0; a < j; ++a) off += m_sizes_[static_cast<size_t>(a)] * N_;
    return {off, m_sizes_[static_cast<size_t>(j)] * N_};
}

Eigen::Block<const Mat> Predictor::block_past_u(int i, int j) const {
    const auto r = row_range(i);
    const auto c = col_past_u(j);
    return k_.block(r.offset, c.offset, r.size, c.size);
}

Eigen::Block<const Mat> Predictor::block_past_y(int i, int j) const {
    const auto r = row_range(i);
    const auto c = col_past_y(j);
    return k_.block(r.offset, c.offset, r.size, c.size);
}

Eigen::Block<const Mat> Predictor::block_future(int i, int j) const {
    const auto r = row_range(i);
    const auto c = col_future_u(j);
    return k_.block(r.offset, c.offset, r.size, c.size);
}

Vec PredictionWindow::stacked() const {
    Vec w(u_ini.size() + y_ini.size() + u_future.size());
    w << u_ini, y_ini, u_future;
    return w;
}

PredictionWindow window_from_trajectory(const Trajectory& traj, int start, int T_ini, int N,
                                        bool clean_target) {
    if (start < 0 || start + T_ini + N > traj.length())
        throw precondition_error("window_from_trajectory: window leaves the trajectory");
    const int M = static_cast<int>(traj.m_sizes.size());
    PredictionWindow w;
    w.u_ini.resize(traj.m_total() * T_ini);
    w.y_ini.resize(traj.p_total() * T_ini);
    w.u_future.resize(traj.m_total() * N);
    Vec yf(traj.p_total() * N);
    int uo = 0, yo = 0, ufo = 0, yfo = 0;
    for (int i = 0; i < M; ++i) {
        const auto ui = traj.u_block(i);
        const auto yi = traj.y_block(i);
        const auto yci = traj.y_clean_block(i);
        const int mi = traj.m_sizes[static_cast<size_t>(i)];
        const int pi = traj.p_sizes[static_cast<size_t>(i)];
        for (int t = 0; t < T_ini; ++t) {
            w.u_ini.segment(uo + t * mi, mi) = ui.col(start + t);
            w.y_ini.segment(yo + t * pi, pi) = yi.col(start + t);
        }
        for (int t = 0; t < N; ++t) {
            w.u_future.segment(ufo + t * mi, mi) = ui.col(start + T_ini + t);
            yf.segment(yfo + t * pi, pi) =
                clean_target ? yci.col(start + T_ini + t) : yi.col(start + T_ini + t);
        }
        uo += mi * T_ini;
        yo += pi * T_ini;
        ufo += mi * N;
        yfo += pi * N;
    }
    w.y_future = yf;
    return w;
}

Mat masked_z(const HankelBundle& bundle, uint32_t mask_with_self) {
    int rows = 0;
    for (int j = 0; j < bundle.M; ++j) {
        if (!((mask_with_self >> j) & 1u)) continue;
        rows += bundle.up_range(j).size + bundle.yp_range(j).size + bundle.uf_range(j).size;
    }
    Mat z(rows, bundle.L);
    int at = 0;
    for (int j = 0; j < bundle.M; ++j) {
        if (!((mask_with_self >> j) & 1u)) continue;
        const auto r = bundle.up_range(j);
        z.middleRows(at, r.size) = bundle.up.middleRows(r.offset, r.size);
        at += r.size;
    }
    for (int j = 0; j < bundle.M; ++j) {
        if (!((mask_with_self >> j) & 1u)) continue;
        const auto r = bundle.yp_range(j);
        z.middleRows(at, r.size) = bundle.yp.middleRows(r.offset, r.size);
        at += r.size;
    }
    for (int j = 0; j < bundle.M; ++j) {
        if (!((mask_with_self >> j) & 1u)) continue;
        const auto r = bundle.uf_range(j);
        z.middleRows(at, r.size) = bundle.uf.middleRows(r.offset, r.size);
        at += r.size;
    }
    return z;
}

void scatter_masked_fit(Mat& k, const HankelBundle& bundle, int agent, uint32_t mask_with_self,
                        const Mat& k_masked) {
    const uint32_t mask = mask_with_self | (1u << agent);
    const auto rr = bundle.yf_range(agent);
    int at = 0;
    auto put = [&](const BlockRange& dst) {
        k.block(rr.offset, dst.offset, rr.size, dst.size) =
            k_masked.middleCols(at, dst.size);
        at += dst.size;
    };
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) put(bundle.z_up_range(j));
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) put(bundle.z_yp_range(j));
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) put(bundle.z_uf_range(j));
}

namespace {

void check_bundle_nonempty(const HankelBundle& bundle) {
    if (bundle.M < 1 || bundle.L < 1 || bundle.yf.size() == 0)
        throw precondition_error("fit: bundle is empty");
}

}  // namespace

Predictor fit_unstructured(const HankelBundle& bundle) {
    check_bundle_nonempty(bundle);
    Mat k = lsq_min_norm(bundle.z(), bundle.yf);
    return Predictor(std::move(k), bundle, std::nullopt);
}

MaskedFit fit_agent_masked(const HankelBundle& bundle, int agent, uint32_t mask_with_self) {
    const Mat z = masked_z(bundle, mask_with_self | (1u << agent));
    const auto rr = bundle.yf_range(agent);
    const Mat yi = bundle.yf.middleRows(rr.offset, rr.size);
    MaskedFit fit;
    fit.k = lsq_min_norm(z, yi);
    fit.residual = (yi - fit.k * z).squaredNorm();
    return fit;
}

MaskedFit fit_agent_masked_box(const HankelBundle& bundle, int agent, uint32_t mask_with_self,
                               double big_m) {
    const uint32_t mask = mask_with_self | (1u << agent);
    const Mat z = masked_z(bundle, mask);
    const auto rr = bundle.yf_range(agent);
    const Mat yi = bundle.yf.middleRows(rr.offset, rr.size);

    const double inf = std::numeric_limits<double>::infinity();
    Mat lo = Mat::Constant(yi.rows(), z.rows(), -big_m);
    Mat hi = Mat::Constant(yi.rows(), z.rows(), big_m);
    // The agent's own columns carry no box.
    int at = 0;
    auto free_cols = [&](int width, bool own) {
        if (own) {
            lo.middleCols(at, width).setConstant(-inf);
            hi.middleCols(at, width).setConstant(inf);
        }
        at += width;
    };
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) free_cols(bundle.up_range(j).size, j == agent);
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) free_cols(bundle.yp_range(j).size, j == agent);
    for (int j = 0; j < bundle.M; ++j)
        if ((mask >> j) & 1u) free_cols(bundle.uf_range(j).size, j == agent);

    MaskedFit fit;
    fit.k = box_lsq(z, yi, lo, hi);
    fit.residual = (yi - fit.k * z).squaredNorm();
    return fit;
}

Predictor fit_structured(const HankelBundle& bundle, const Topology& topo) {
    check_bundle_nonempty(bundle);
    if (topo.size() != bundle.M)
        throw precondition_error("fit_structured: topology size does not match the bundle");
    Mat k = Mat::Zero(bundle.p_total() * bundle.N, bundle.z_rows());
    for (int i = 0; i < bundle.M; ++i) {
        const uint32_t mask = topo.row_mask_with_self(i);
        const MaskedFit fit = fit_agent_masked(bundle, i, mask);
        scatter_masked_fit(k, bundle, i, mask, fit.k);
    }
    return Predictor(std::move(k), bundle, topo);
}

Vec predict(const Predictor& k, const PredictionWindow& w) {
    if (w.u_ini.size() != k.m_total() * k.T_ini() ||
        w.y_ini.size() != k.p_total() * k.T_ini() || w.u_future.size() != k.m_total() * k.N())
        throw precondition_error("predict: window dimensions do not match the predictor");
    return k.k() * w.stacked();
}

double fit_residual(const Predictor& k, const HankelBundle& bundle) {
    return (bundle.yf - k.k() * bundle.z()).squaredNorm();
}

double fit_residual_agent(const Predictor& k, const HankelBundle& bundle, int agent) {
    const auto rr = bundle.yf_range(agent);
    const Mat err = bundle.yf - k.k() * bundle.z();
    return err.middleRows(rr.offset, rr.size).squaredNorm();
}

double validation_mse(const Predictor& k, const NetworkedSystem& sys, int n_windows,
                      const NoiseSpec& noise, uint64_t seed, double input_variance, int T_val) {
    if (n_windows < 1) throw precondition_error("validation_mse: n_windows must be >= 1");
    const int span = k.T_ini() + k.N();
    if (T_val < span) throw precondition_error("validation_mse: T_val shorter than a window");

    const Mat u = generate_pe_input(sys.m_total(), T_val, input_variance, derive_seed(seed, 1));
    NoiseSpec local = noise;
    local.seed = derive_seed(seed, 2);
    const Trajectory traj = simulate(sys, u, Vec::Zero(sys.n_total()), local);

    const int last_start = T_val - span;
    double acc = 0.0;
    for (int w = 0; w < n_windows; ++w) {
        const int start =
            n_windows == 1 ? 0
                           : static_cast<int>(std::llround(static_cast<double>(w) *
                                                           static_cast<double>(last_start) /
                                                           static_cast<double>(n_windows - 1)));
        const PredictionWindow win = window_from_trajectory(traj, start, k.T_ini(), k.N(), true);
        const Vec yhat = predict(k, win);
        acc += (yhat - *win.y_future).squaredNorm();
    }
    return acc / (static_cast<double>(n_windows) * static_cast<double>(k.p_total()) *
                  static_cast<double>(k.N()));
}

StructureDiagnostics structure_diagnostics(const Predictor& k) {
    StructureDiagnostics d;
    const int past_cols = (k.m_total() + k.p_total()) * k.T_ini();
    d.past_rank = numerical_rank(k.k().leftCols(past_cols));

    double worst = 0.0;
    for (int i = 0; i < k.M(); ++i) {
        const int pi = k.p_sizes()[static_cast<size_t>(i)];
        for (int j = 0; j < k.M(); ++j) {
            const int mj = k.m_sizes()[static_cast<size_t>(j)];
            const auto block = k.block_future(i, j);
            for (int a = 0; a < k.N(); ++a)
                for (int b = a + 1; b < k.N(); ++b) {
                    const double v =
                        block.block(a * pi, b * mj, pi, mj).cwiseAbs().maxCoeff();
                    worst = std::max(worst, v);
                }
        }
    }
    d.max_noncausal = worst;
    return d;
}

}  // namespace commtopo
