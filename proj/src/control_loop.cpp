#include "commtopo/control_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "commtopo/errors.hpp"
#include "commtopo/parallel.hpp"
#include "commtopo/rng.hpp"
#include "commtopo/stats.hpp"

namespace commtopo {

AgentSolve solve_local_mpc(const Mat& k_masked, const Vec& w_fixed, int own_uf_offset,
                           int own_uf_size, const MpcConfig& cfg) {
    if (w_fixed.size() != k_masked.cols())
        throw precondition_error("solve_local_mpc: window length does not match K columns");
    const int ny = static_cast<int>(k_masked.rows());
    const int nu = own_uf_size;
    const double q = cfg.q_weight, r = cfg.r_weight, ls = cfg.lambda_s;

    const Vec b = k_masked * w_fixed;
    const Mat p = k_masked.middleCols(own_uf_offset, own_uf_size);

    // min_u,s  q||b + P u + s||^2 + r||u||^2 + lambda_s||s||^2
    Mat h(nu + ny, nu + ny);
    h.topLeftCorner(nu, nu) = q * p.transpose() * p + r * Mat::Identity(nu, nu);
    h.topRightCorner(nu, ny) = q * p.transpose();
    h.bottomLeftCorner(ny, nu) = q * p;
    h.bottomRightCorner(ny, ny) = (q + ls) * Mat::Identity(ny, ny);
    Vec g(nu + ny);
    g.head(nu) = q * p.transpose() * b;
    g.tail(ny) = q * b;

    const Vec z = h.ldlt().solve(-g);
    AgentSolve out;
    out.u_future = z.head(nu);
    out.slack = z.tail(ny);
    const Vec yhat = b + p * out.u_future + out.slack;
    out.gradient.resize(nu + ny);
    out.gradient.head(nu) = 2.0 * (q * p.transpose() * yhat + r * out.u_future);
    out.gradient.tail(ny) = 2.0 * (q * yhat + ls * out.slack);
    return out;
}

namespace {

struct AgentWorkspace {
    std::vector<int> sources;  // {i} union in-neighbors, ascending
    Mat k_masked;              // agent's predictor rows over its sources' columns
    int own_uf_offset = 0;
    int own_uf_size = 0;
};

AgentWorkspace make_workspace(const Predictor& k, const Topology& topo, int agent) {
    AgentWorkspace ws;
    ws.sources = topo.in_neighbors(agent);
    ws.sources.push_back(agent);
    std::sort(ws.sources.begin(), ws.sources.end());

    const auto rr = k.row_range(agent);
    int cols = 0;
    for (int j : ws.sources)
        cols += k.col_past_u(j).size + k.col_past_y(j).size + k.col_future_u(j).size;
    ws.k_masked.resize(rr.size, cols);

    int at = 0;
    auto take = [&](const BlockRange& c, bool own_future) {
        ws.k_masked.middleCols(at, c.size) = k.k().block(rr.offset, c.offset, rr.size, c.size);
        if (own_future) {
            ws.own_uf_offset = at;
            ws.own_uf_size = c.size;
        }
        at += c.size;
    };
    for (int j : ws.sources) take(k.col_past_u(j), false);
    for (int j : ws.sources) take(k.col_past_y(j), false);
    for (int j : ws.sources) take(k.col_future_u(j), j == agent);
    return ws;
}

}  // namespace

ClosedLoopResult run_mpc(const NetworkedSystem& sys, const Predictor& k, const Topology& topo,
                         const MpcConfig& cfg, const NoiseSpec& noise, uint64_t seed) {
    const int M = sys.num_subsystems();
    if (k.M() != M || k.m_sizes() != sys.m_sizes() || k.p_sizes() != sys.p_sizes())
        throw precondition_error("run_mpc: predictor does not match the system dimensions");
    if (topo.size() != M) throw precondition_error("run_mpc: topology size mismatch");
    if (k.structure()) {
        if (!(*k.structure() == topo))
            throw precondition_error("run_mpc: predictor was fitted under a different topology");
    } else if (!(topo == Topology::fully_connected(M))) {
        throw precondition_error(
            "run_mpc: unstructured predictors require the fully connected topology");
    }
    if (cfg.T_sim < 1) throw precondition_error("run_mpc: T_sim must be >= 1");
    if (!(cfg.q_weight >= 0.0) || !(cfg.r_weight > 0.0) || !(cfg.lambda_s >= 0.0))
        throw precondition_error("run_mpc: weights must satisfy q >= 0, r > 0, lambda_s >= 0");

    const int T_ini = k.T_ini(), N = k.N();
    const int m_tot = sys.m_total(), p_tot = sys.p_total();

    Vec x = cfg.x0.size() ? cfg.x0 : Vec::Zero(sys.n_total());
    if (x.size() != sys.n_total()) throw precondition_error("run_mpc: x0 length mismatch");

    // Measurement-noise level from the excitation regime, as in data collection.
    Vec noise_std = Vec::Zero(p_tot);
    const bool noisy = noise.mode == NoiseSpec::Mode::white_gaussian_by_snr;
    if (noisy) {
        if (!(noise.snr > 0.0)) throw precondition_error("run_mpc: snr must be positive");
        const Mat u_cal = generate_pe_input(m_tot, 500, 1.0, derive_seed(noise.seed, 77));
        const Trajectory cal = simulate(sys, u_cal, Vec::Zero(sys.n_total()),
                                        NoiseSpec::noiseless());
        for (int ch = 0; ch < p_tot; ++ch) {
            const double m = cal.y_clean.row(ch).mean();
            const double var = (cal.y_clean.row(ch).array() - m).square().mean();
            noise_std(ch) = std::sqrt(var / noise.snr);
        }
    }

    std::vector<AgentWorkspace> ws;
    ws.reserve(static_cast<size_t>(M));
    std::set<std::pair<int, int>> sources;
    for (int i = 0; i < M; ++i) {
        ws.push_back(make_workspace(k, topo, i));
        for (int j : ws.back().sources) sources.emplace(i, j);
    }

    Mat u_hist = Mat::Zero(m_tot, T_ini);  // column T_ini-1 is the most recent step
    Mat y_hist = Mat::Zero(p_tot, T_ini);
    std::vector<Vec> plans(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i)
        plans[static_cast<size_t>(i)] = Vec::Zero(sys.m_of(i) * N);

    ClosedLoopResult out;
    out.u = Mat::Zero(m_tot, cfg.T_sim);
    out.y = Mat::Zero(p_tot, cfg.T_sim);
    out.y_clean = Mat::Zero(p_tot, cfg.T_sim);
    out.per_agent_cost.assign(static_cast<size_t>(M), 0.0);
    out.info_sources.assign(sources.begin(), sources.end());

    Rng rng(derive_seed(seed, noise.seed));
    Vec v = Vec::Zero(p_tot);

    for (int step = 0; step < cfg.T_sim; ++step) {
        std::vector<Vec> new_plans(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) {
            const auto& w = ws[static_cast<size_t>(i)];
            Vec wf = Vec::Zero(w.k_masked.cols());
            int at = 0;
            for (int j : w.sources) {
                const int mj = sys.m_of(j);
                for (int t = 0; t < T_ini; ++t)
                    wf.segment(at + t * mj, mj) = u_hist.block(sys.u_offset(j), t, mj, 1);
                at += mj * T_ini;
            }
            for (int j : w.sources) {
                const int pj = sys.p_of(j);
                for (int t = 0; t < T_ini; ++t)
                    wf.segment(at + t * pj, pj) = y_hist.block(sys.y_offset(j), t, pj, 1);
                at += pj * T_ini;
            }
            for (int j : w.sources) {
                const int mj = sys.m_of(j);
                if (j == i) {  // decision slot stays zero
                    at += mj * N;
                    continue;
                }
                // Neighbor plan from the previous step, shifted with held tail.
                const Vec& plan = plans[static_cast<size_t>(j)];
                for (int t = 0; t < N; ++t) {
                    const int shifted = std::min(t + 1, N - 1);
                    wf.segment(at + t * mj, mj) = plan.segment(shifted * mj, mj);
                }
                at += mj * N;
            }
            const AgentSolve sol = solve_local_mpc(w.k_masked, wf, w.own_uf_offset,
                                                   w.own_uf_size, cfg);
            out.u.block(sys.u_offset(i), step, sys.m_of(i), 1) =
                sol.u_future.head(sys.m_of(i));
            new_plans[static_cast<size_t>(i)] = sol.u_future;
            out.max_slack_norm = std::max(out.max_slack_norm, sol.slack.norm());
        }

        const Vec uk = out.u.col(step);
        const Vec yc = sys.C() * x + sys.D() * uk;
        if (noisy)
            for (int ch = 0; ch < p_tot; ++ch) v(ch) = noise_std(ch) * rng.gaussian();
        out.y_clean.col(step) = yc;
        out.y.col(step) = yc + v;

        for (int i = 0; i < M; ++i) {
            const double ycost =
                out.y.block(sys.y_offset(i), step, sys.p_of(i), 1).squaredNorm();
            const double ucost = out.u.block(sys.u_offset(i), step, sys.m_of(i), 1).squaredNorm();
            out.per_agent_cost[static_cast<size_t>(i)] +=
                cfg.q_weight * ycost + cfg.r_weight * ucost;
        }
        out.cost += cfg.q_weight * out.y.col(step).squaredNorm() +
                    cfg.r_weight * uk.squaredNorm();

        x = sys.A() * x + sys.B() * uk;
        if (noisy) x += sys.coupling() * v;
        if (!x.allFinite() || !out.y.col(step).allFinite()) {
            out.diverged = true;
            out.diverged_step = step;
            out.cost = std::numeric_limits<double>::infinity();
            break;
        }

        // Synchronization barrier: histories advance and plans are exchanged.
        u_hist.leftCols(T_ini - 1) = u_hist.rightCols(T_ini - 1).eval();
        u_hist.col(T_ini - 1) = uk;
        y_hist.leftCols(T_ini - 1) = y_hist.rightCols(T_ini - 1).eval();
        y_hist.col(T_ini - 1) = out.y.col(step);
        plans = std::move(new_plans);
    }
    return out;
}

Topology random_topology(int M, int n_links, uint64_t seed) {
    const int total = M * (M - 1);
    if (n_links < 0 || n_links > total)
        throw precondition_error("random_topology: n_links must be in [0, M(M-1)]");
    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            if (i != j) slots.emplace_back(i, j);
    Rng rng(seed);
    Topology t(M);
    for (int pick = 0; pick < n_links; ++pick) {
        const int idx = pick + rng.uniform_int(total - pick);
        std::swap(slots[static_cast<size_t>(pick)], slots[static_cast<size_t>(idx)]);
        t.set_link(slots[static_cast<size_t>(pick)].first,
                   slots[static_cast<size_t>(pick)].second, true);
    }
    return t;
}

CommunicationValueReport communication_value(const HankelBundle& bundle,
                                             const NetworkedSystem& sys,
                                             const std::vector<double>& c_values,
                                             const OptimizerConfig& opt_cfg,
                                             const MpcConfig& mpc_cfg, const NoiseSpec& noise,
                                             int n_random, int n_seeds, uint64_t seed,
                                             int jobs) {
    if (n_random < 1 || n_seeds < 1)
        throw precondition_error("communication_value: n_random and n_seeds must be >= 1");
    const int M = bundle.M;
    const int max_links = M * (M - 1);
    const auto sweep = cost_sweep(bundle, c_values, opt_cfg);
    const int n_c = static_cast<int>(sweep.size());

    auto x0_for = [&](uint64_t s) {
        Rng rng(derive_seed(derive_seed(seed, s), 1));
        Vec x0(sys.n_total());
        for (int i = 0; i < x0.size(); ++i) x0(i) = rng.gaussian();
        const double n = x0.norm();
        return n > 0.0 ? Vec(x0 / n) : x0;
    };

    struct Cell {
        double j_opt = 0.0;
        std::vector<double> j_rand;
    };
    std::vector<std::vector<Cell>> cells(static_cast<size_t>(n_c));
    for (auto& v : cells) v.resize(static_cast<size_t>(n_seeds));

    parallel_for(n_c * n_seeds, jobs, [&](int job) {
        const int ci = job / n_seeds;
        const int s = job % n_seeds;
        const auto& res = sweep[static_cast<size_t>(ci)];
        const int links = res.topology.num_links();

        MpcConfig cfg = mpc_cfg;
        cfg.x0 = x0_for(static_cast<uint64_t>(s));
        NoiseSpec noise_s = noise;
        noise_s.seed = derive_seed(derive_seed(seed, static_cast<uint64_t>(s)), 2);
        const uint64_t mpc_seed = derive_seed(derive_seed(seed, static_cast<uint64_t>(s)), 3);

        Cell& cell = cells[static_cast<size_t>(ci)][static_cast<size_t>(s)];
        cell.j_opt = run_mpc(sys, res.predictor, res.topology, cfg, noise_s, mpc_seed).cost;

        if (links == 0 || links == max_links) {
            // Single possible support with this link count.
            cell.j_rand.push_back(cell.j_opt);
            return;
        }
        for (int r = 0; r < n_random; ++r) {
            const uint64_t topo_seed = derive_seed(
                derive_seed(seed, 7000u + static_cast<uint64_t>(ci)),
                static_cast<uint64_t>(s) * 1000u + static_cast<uint64_t>(r));
            const Topology t = random_topology(M, links, topo_seed);
            if (t == res.topology) {
                cell.j_rand.push_back(cell.j_opt);
                continue;
            }
            const Predictor kr = fit_structured(bundle, t);
            cell.j_rand.push_back(run_mpc(sys, kr, t, cfg, noise_s, mpc_seed).cost);
        }
    });

    CommunicationValueReport rep;
    std::vector<double> pred_costs, ctrl_costs;
    for (int ci = 0; ci < n_c; ++ci) {
        const auto& res = sweep[static_cast<size_t>(ci)];
        CommunicationValueRow row;
        row.c_value = res.c_value;
        row.links = res.topology.num_links();
        row.pred_cost = res.residual;
        row.objective = res.objective;
        double opt_sum = 0.0, rand_sum = 0.0;
        int rand_n = 0;
        for (int s = 0; s < n_seeds; ++s) {
            const Cell& cell = cells[static_cast<size_t>(ci)][static_cast<size_t>(s)];
            opt_sum += cell.j_opt;
            for (double v : cell.j_rand) {
                rand_sum += v;
                ++rand_n;
            }
        }
        row.j_opt = opt_sum / static_cast<double>(n_seeds);
        row.j_rand = rand_sum / static_cast<double>(rand_n);
        row.ratio = row.j_opt / row.j_rand;
        pred_costs.push_back(row.pred_cost);
        ctrl_costs.push_back(row.j_opt);
        rep.rows.push_back(row);
    }
    if (rep.rows.size() >= 2)
        rep.spearman_pred_vs_ctrl = spearman_rho(pred_costs, ctrl_costs);
    rep.min_ratio = rep.rows.empty() ? 0.0
                                     : std::min_element(rep.rows.begin(), rep.rows.end(),
                                                        [](const auto& a, const auto& b) {
                                                            return a.ratio < b.ratio;
                                                        })
                                           ->ratio;
    rep.max_ratio = rep.rows.empty() ? 0.0
                                     : std::max_element(rep.rows.begin(), rep.rows.end(),
                                                        [](const auto& a, const auto& b) {
                                                            return a.ratio < b.ratio;
                                                        })
                                           ->ratio;
    return rep;
}

}  // namespace commtopo
