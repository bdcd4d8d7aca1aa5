#include "commtopo/data_pipeline.hpp"

#include <numeric>
#include <string>

#include "commtopo/errors.hpp"

namespace commtopo {

void DataConfig::validate(int m_total) const {
    if (T_ini < 1) throw precondition_error("DataConfig: T_ini must be >= 1");
    if (N < 1) throw precondition_error("DataConfig: N must be >= 1");
    if (N_coll < 1) throw precondition_error("DataConfig: N_coll must be >= 1");
    if (n_guess < 0) throw precondition_error("DataConfig: n_guess must be >= 0");
    const int tmin = t_min(m_total);
    if (T < tmin)
        throw precondition_error(
            "DataConfig: T = " + std::to_string(T) + " is below the excitation lower bound (m+1)(T_ini+N+n_guess)-1 = " +
            std::to_string(tmin));
}

namespace {

int total_of(const std::vector<int>& sizes) {
    return std::accumulate(sizes.begin(), sizes.end(), 0);
}

BlockRange agent_range(const std::vector<int>& sizes, int i, int depth) {
    int off = 0;
    for (int j = 0; j < i; ++j) off += sizes[static_cast<size_t>(j)] * depth;
    return {off, sizes[static_cast<size_t>(i)] * depth};
}

}  // namespace

int HankelBundle::m_total() const { return total_of(m_sizes); }
int HankelBundle::p_total() const { return total_of(p_sizes); }

BlockRange HankelBundle::up_range(int i) const { return agent_range(m_sizes, i, T_ini); }
BlockRange HankelBundle::yp_range(int i) const { return agent_range(p_sizes, i, T_ini); }
BlockRange HankelBundle::uf_range(int i) const { return agent_range(m_sizes, i, N); }
BlockRange HankelBundle::yf_range(int i) const { return agent_range(p_sizes, i, N); }

BlockRange HankelBundle::z_up_range(int i) const { return up_range(i); }

BlockRange HankelBundle::z_yp_range(int i) const {
    BlockRange r = yp_range(i);
    r.offset += m_total() * T_ini;
    return r;
}

BlockRange HankelBundle::z_uf_range(int i) const {
    BlockRange r = uf_range(i);
    r.offset += (m_total() + p_total()) * T_ini;
    return r;
}

int HankelBundle::z_rows() const { return (m_total() + p_total()) * T_ini + m_total() * N; }

Mat HankelBundle::z() const {
    Mat out(z_rows(), L);
    out.topRows(up.rows()) = up;
    out.middleRows(up.rows(), yp.rows()) = yp;
    out.bottomRows(uf.rows()) = uf;
    return out;
}

Mat hankel(const Mat& signal, int depth) {
    const int n = static_cast<int>(signal.rows());
    const int T = static_cast<int>(signal.cols());
    if (n < 1) throw precondition_error("hankel: signal needs at least one channel");
    if (depth < 1) throw precondition_error("hankel: depth must be >= 1");
    if (depth > T)
        throw precondition_error("hankel: depth " + std::to_string(depth) +
                                 " exceeds signal length " + std::to_string(T));
    const int cols = T - depth + 1;
    Mat h(n * depth, cols);
    for (int r = 0; r < depth; ++r) h.middleRows(r * n, n) = signal.middleCols(r, cols);
    return h;
}

HankelBundle build_bundle(const Trajectory& traj, const DataConfig& cfg) {
    if (cfg.T_ini < 1 || cfg.N < 1)
        throw precondition_error("build_bundle: T_ini and N must be >= 1");
    if (traj.length() != cfg.T)
        throw precondition_error("build_bundle: trajectory length " +
                                 std::to_string(traj.length()) + " does not match cfg.T = " +
                                 std::to_string(cfg.T));
    if (cfg.T < cfg.T_ini + cfg.N)
        throw precondition_error("build_bundle: T must be at least T_ini + N");

    const int M = static_cast<int>(traj.m_sizes.size());
    HankelBundle b;
    b.M = M;
    b.T_ini = cfg.T_ini;
    b.N = cfg.N;
    b.L = cfg.T - (cfg.T_ini + cfg.N) + 1;
    b.m_sizes = traj.m_sizes;
    b.p_sizes = traj.p_sizes;

    b.up.resize(b.m_total() * cfg.T_ini, b.L);
    b.yp.resize(b.p_total() * cfg.T_ini, b.L);
    b.uf.resize(b.m_total() * cfg.N, b.L);
    b.yf.resize(b.p_total() * cfg.N, b.L);

    const int past_len = cfg.T - cfg.N;       // samples 1 .. T-N
    const int future_len = cfg.T - cfg.T_ini; // samples T_ini+1 .. T
    for (int i = 0; i < M; ++i) {
        const auto ui = traj.u_block(i);
        const auto yi = traj.y_block(i);
        b.up.middleRows(b.up_range(i).offset, b.up_range(i).size) =
            hankel(ui.leftCols(past_len), cfg.T_ini);
        b.yp.middleRows(b.yp_range(i).offset, b.yp_range(i).size) =
            hankel(yi.leftCols(past_len), cfg.T_ini);
        b.uf.middleRows(b.uf_range(i).offset, b.uf_range(i).size) =
            hankel(ui.rightCols(future_len), cfg.N);
        b.yf.middleRows(b.yf_range(i).offset, b.yf_range(i).size) =
            hankel(yi.rightCols(future_len), cfg.N);
    }
    return b;
}

HankelBundle average_bundles(const std::vector<HankelBundle>& bundles) {
    if (bundles.empty()) throw precondition_error("average_bundles: empty list");
    const HankelBundle& first = bundles.front();
    HankelBundle out = first;
    for (size_t r = 1; r < bundles.size(); ++r) {
        const HankelBundle& b = bundles[r];
        if (b.M != first.M || b.T_ini != first.T_ini || b.N != first.N || b.L != first.L ||
            b.m_sizes != first.m_sizes || b.p_sizes != first.p_sizes)
            throw precondition_error("average_bundles: bundle " + std::to_string(r) +
                                     " has mismatched dimensions");
        if (!(b.up.array() == first.up.array()).all() ||
            !(b.uf.array() == first.uf.array()).all())
            throw precondition_error(
                "average_bundles: input blocks differ; experiments did not share the "
                "excitation sequence");
        out.yp += b.yp;
        out.yf += b.yf;
    }
    const double inv = 1.0 / static_cast<double>(bundles.size());
    out.yp *= inv;
    out.yf *= inv;
    return out;
}

PersistencyReport check_persistency(const Mat& u, int order) {
    PersistencyReport rep;
    rep.required = static_cast<int>(u.rows()) * order;
    if (order < 1 || order > u.cols()) {
        rep.rank = 0;
        rep.ok = false;
        return rep;
    }
    rep.rank = numerical_rank(hankel(u, order));
    rep.ok = rep.rank == rep.required;
    return rep;
}

}  // namespace commtopo
