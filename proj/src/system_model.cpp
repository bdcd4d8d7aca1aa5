#include "commtopo/system_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "commtopo/errors.hpp"
#include "commtopo/rng.hpp"

namespace commtopo {

namespace {

std::vector<int> offsets_of(const std::vector<int>& sizes) {
    std::vector<int> off(sizes.size() + 1, 0);
    for (size_t i = 0; i < sizes.size(); ++i) off[i + 1] = off[i] + sizes[i];
    return off;
}

int block_offset(const std::vector<int>& off, int i) { return off[static_cast<size_t>(i)]; }

}  // namespace

Eigen::Block<const Mat> Trajectory::u_block(int i) const {
    const auto off = offsets_of(m_sizes);
    return u.middleRows(block_offset(off, i), m_sizes[static_cast<size_t>(i)]);
}

Eigen::Block<const Mat> Trajectory::y_block(int i) const {
    const auto off = offsets_of(p_sizes);
    return y.middleRows(block_offset(off, i), p_sizes[static_cast<size_t>(i)]);
}

Eigen::Block<const Mat> Trajectory::y_clean_block(int i) const {
    const auto off = offsets_of(p_sizes);
    return y_clean.middleRows(block_offset(off, i), p_sizes[static_cast<size_t>(i)]);
}

NetworkedSystem::NetworkedSystem(std::vector<SubsystemModel> subsystems)
    : subs_(std::move(subsystems)) {
    const int M = static_cast<int>(subs_.size());
    if (M == 0) throw precondition_error("NetworkedSystem: needs at least one subsystem");

    for (int i = 0; i < M; ++i) {
        auto& s = subs_[static_cast<size_t>(i)];
        s.index = i;
        const std::string tag = "subsystem " + std::to_string(i);
        if (s.A.rows() != s.A.cols() || s.A.rows() < 1)
            throw precondition_error(tag + ": A must be square and nonempty");
        const int n = s.n(), m = s.m(), p = s.p();
        if (s.B.rows() != n || m < 1)
            throw precondition_error(tag + ": B must be n x m with m >= 1");
        if (s.C.cols() != n || p < 1)
            throw precondition_error(tag + ": C must be p x n with p >= 1");
        if (s.D.rows() != p || s.D.cols() != m)
            throw precondition_error(tag + ": D must be p x m");
    }

    std::vector<int> ns, ms, ps;
    for (const auto& s : subs_) {
        ns.push_back(s.n());
        ms.push_back(s.m());
        ps.push_back(s.p());
    }
    x_off_ = offsets_of(ns);
    u_off_ = offsets_of(ms);
    y_off_ = offsets_of(ps);
    n_total_ = x_off_.back();
    m_total_ = u_off_.back();
    p_total_ = y_off_.back();

    for (int i = 0; i < M; ++i) {
        const auto& s = subs_[static_cast<size_t>(i)];
        for (const auto& [j, Eij] : s.E) {
            const std::string tag =
                "coupling E(" + std::to_string(i) + "," + std::to_string(j) + ")";
            if (j < 0 || j >= M) throw precondition_error(tag + ": index out of range");
            if (Eij.rows() != s.n() || Eij.cols() != subs_[static_cast<size_t>(j)].p())
                throw precondition_error(tag + ": must be n_i x p_j");
            if (j == i && Eij.cwiseAbs().maxCoeff() != 0.0)
                throw precondition_error(tag + ": self-coupling must be zero");
        }
    }

    A_ = Mat::Zero(n_total_, n_total_);
    B_ = Mat::Zero(n_total_, m_total_);
    C_ = Mat::Zero(p_total_, n_total_);
    D_ = Mat::Zero(p_total_, m_total_);
    E_ = Mat::Zero(n_total_, p_total_);
    for (int i = 0; i < M; ++i) {
        const auto& si = subs_[static_cast<size_t>(i)];
        A_.block(x_off_[i], x_off_[i], si.n(), si.n()) = si.A;
        B_.block(x_off_[i], u_off_[i], si.n(), si.m()) = si.B;
        C_.block(y_off_[i], x_off_[i], si.p(), si.n()) = si.C;
        D_.block(y_off_[i], u_off_[i], si.p(), si.m()) = si.D;
        for (const auto& [j, Eij] : si.E) {
            if (j == i) continue;
            const auto& sj = subs_[static_cast<size_t>(j)];
            A_.block(x_off_[i], x_off_[j], si.n(), sj.n()) += Eij * sj.C;
            B_.block(x_off_[i], u_off_[j], si.n(), sj.m()) += Eij * sj.D;
            E_.block(x_off_[i], y_off_[j], si.n(), sj.p()) = Eij;
        }
    }

    // Kalman rank tests on the assembled pair.
    Mat obs(p_total_ * n_total_, n_total_);
    Mat ctrl(n_total_, m_total_ * n_total_);
    Mat CAk = C_;
    Mat AkB = B_;
    for (int k = 0; k < n_total_; ++k) {
        obs.middleRows(k * p_total_, p_total_) = CAk;
        ctrl.middleCols(k * m_total_, m_total_) = AkB;
        if (k + 1 < n_total_) {
            CAk = CAk * A_;
            AkB = A_ * AkB;
        }
    }
    obs_rank_ = numerical_rank(obs);
    ctrl_rank_ = numerical_rank(ctrl);
    if (obs_rank_ != n_total_)
        throw precondition_error("NetworkedSystem: (A, C) fails the observability rank check (" +
                                 std::to_string(obs_rank_) + " < " + std::to_string(n_total_) +
                                 ")");
    if (ctrl_rank_ != n_total_)
        throw precondition_error("NetworkedSystem: (A, B) fails the controllability rank check (" +
                                 std::to_string(ctrl_rank_) + " < " + std::to_string(n_total_) +
                                 ")");
}

std::vector<int> NetworkedSystem::m_sizes() const {
    std::vector<int> v;
    for (const auto& s : subs_) v.push_back(s.m());
    return v;
}

std::vector<int> NetworkedSystem::p_sizes() const {
    std::vector<int> v;
    for (const auto& s : subs_) v.push_back(s.p());
    return v;
}

NetworkedSystem build_swing_benchmark(const SwingParams& params) {
    const int M = static_cast<int>(params.inertia.size());
    if (M < 1) throw precondition_error("swing: need at least one node");
    if (static_cast<int>(params.damping.size()) != M)
        throw precondition_error("swing: damping size must match inertia size");
    if (params.coupling.rows() != M || params.coupling.cols() != M)
        throw precondition_error("swing: coupling must be M x M");
    if (!(params.dt > 0.0)) throw precondition_error("swing: dt must be positive");
    for (int i = 0; i < M; ++i) {
        if (!(params.inertia[static_cast<size_t>(i)] > 0.0))
            throw precondition_error("swing: inertia[" + std::to_string(i) +
                                     "] must be positive");
        for (int j = 0; j < M; ++j) {
            if (i != j && params.coupling(i, j) < 0.0)
                throw precondition_error("swing: coupling(" + std::to_string(i) + "," +
                                         std::to_string(j) + ") must be nonnegative");
        }
    }

    std::vector<SubsystemModel> subs(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
        const double mi = params.inertia[static_cast<size_t>(i)];
        const double di = params.damping[static_cast<size_t>(i)];
        double ki = 0.0;
        for (int j = 0; j < M; ++j)
            if (j != i) ki += params.coupling(i, j);

        auto& s = subs[static_cast<size_t>(i)];
        s.A = Mat{{1.0, params.dt}, {-(ki / mi) * params.dt, 1.0 - (di / mi) * params.dt}};
        s.B = Mat{{0.0}, {1.0 / mi}};
        s.C = Mat{{1.0, 0.0}};
        s.D = Mat::Zero(1, 1);
        for (int j = 0; j < M; ++j) {
            const double kij = (i == j) ? 0.0 : params.coupling(i, j);
            if (kij != 0.0) s.E[j] = Mat{{0.0}, {(kij / mi) * params.dt}};
        }
    }
    return NetworkedSystem(std::move(subs));
}

SwingParams benchmark_swing_params() {
    SwingParams p;
    p.inertia = {1.4, 0.8, 0.6, 0.9};
    p.damping = {0.6, 0.65, 0.75, 0.65};
    p.coupling = Mat::Zero(4, 4);
    p.coupling(0, 1) = p.coupling(1, 0) = 1.25;
    p.coupling(1, 2) = p.coupling(2, 1) = 1.2;
    p.coupling(2, 3) = p.coupling(3, 2) = 0.075;
    p.dt = 0.2;
    return p;
}

namespace {

void clean_pass(const NetworkedSystem& sys, const Mat& u, const Vec& x0, Mat& y_out) {
    Vec x = x0;
    for (int k = 0; k < u.cols(); ++k) {
        y_out.col(k) = sys.C() * x + sys.D() * u.col(k);
        x = sys.A() * x + sys.B() * u.col(k);
    }
}

}  // namespace

Trajectory simulate(const NetworkedSystem& sys, const Mat& u, const Vec& x0,
                    const NoiseSpec& noise) {
    const int T = static_cast<int>(u.cols());
    if (T < 1) throw precondition_error("simulate: input must have at least one step");
    if (u.rows() != sys.m_total())
        throw precondition_error("simulate: input rows must equal the total input dimension");
    if (x0.size() != sys.n_total())
        throw precondition_error("simulate: x0 length must equal the total state dimension");

    const int p = sys.p_total();
    Trajectory traj;
    traj.u = u;
    traj.y = Mat::Zero(p, T);
    traj.y_clean = Mat::Zero(p, T);
    traj.m_sizes = sys.m_sizes();
    traj.p_sizes = sys.p_sizes();

    Vec noise_std = Vec::Zero(p);
    const bool noisy = noise.mode == NoiseSpec::Mode::white_gaussian_by_snr;
    if (noisy) {
        if (!(noise.snr > 0.0)) throw precondition_error("simulate: snr must be positive");
        Mat yc(p, T);
        clean_pass(sys, u, x0, yc);
        for (int ch = 0; ch < p; ++ch) {
            const double m = yc.row(ch).mean();
            const double var = (yc.row(ch).array() - m).square().mean();
            noise_std(ch) = std::sqrt(var / noise.snr);
        }
    }

    Rng rng(noise.seed);
    Vec x = x0;
    Vec v = Vec::Zero(p);
    for (int k = 0; k < T; ++k) {
        const Vec yc = sys.C() * x + sys.D() * u.col(k);
        if (noisy)
            for (int ch = 0; ch < p; ++ch) v(ch) = noise_std(ch) * rng.gaussian();
        traj.y_clean.col(k) = yc;
        traj.y.col(k) = yc + v;
        x = sys.A() * x + sys.B() * u.col(k);
        if (noisy) x += sys.coupling() * v;
        if (!x.allFinite() || !traj.y.col(k).allFinite())
            throw divergence_error("simulate: state left the finite range", k);
    }
    return traj;
}

Mat generate_pe_input(int m_total, int T, double variance, uint64_t seed) {
    if (m_total < 1) throw precondition_error("generate_pe_input: m_total must be >= 1");
    if (T < 1) throw precondition_error("generate_pe_input: T must be >= 1");
    if (!(variance > 0.0)) throw precondition_error("generate_pe_input: variance must be > 0");
    const double std = std::sqrt(variance);
    Mat u(m_total, T);
    Rng rng(seed);
    for (int k = 0; k < T; ++k)
        for (int ch = 0; ch < m_total; ++ch) u(ch, k) = std * rng.gaussian();
    return u;
}

}  // namespace commtopo
