#include "commtopo/topology_optimizer.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>

#include "commtopo/errors.hpp"
#include "commtopo/rng.hpp"

namespace commtopo {

namespace {

// Lexicographic order over same-size sender sets: the set owning the lowest
// differing index wins.
bool mask_lex_smaller(uint32_t a, uint32_t b) {
    const uint32_t d = a ^ b;
    if (d == 0) return false;
    return (a >> std::countr_zero(d)) & 1u;
}

struct RowChoice {
    uint32_t mask = 0;  // senders including self
    double cost = 0.0;
    double residual = 0.0;
    double total() const { return cost + residual; }
    int links(int self) const { return std::popcount(mask & ~(1u << self)); }
};

// Tie rule shared by all solver modes: smaller objective, then fewer links,
// then lexicographically smaller sender set.
bool row_better(const RowChoice& cand, const RowChoice& best, int self, double tol) {
    if (cand.total() < best.total() - tol) return true;
    if (cand.total() > best.total() + tol) return false;
    const int cl = cand.links(self), bl = best.links(self);
    if (cl != bl) return cl < bl;
    return mask_lex_smaller(cand.mask, best.mask);
}

class ResidualCache {
public:
    explicit ResidualCache(const HankelBundle& bundle) : bundle_(bundle) {}

    double residual(int agent, uint32_t mask_with_self) {
        const uint64_t key =
            (static_cast<uint64_t>(agent) << 32) | (mask_with_self | (1u << agent));
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double r = fit_agent_masked(bundle_, agent, mask_with_self).residual;
        cache_.emplace(key, r);
        return r;
    }

private:
    const HankelBundle& bundle_;
    std::unordered_map<uint64_t, double> cache_;
};

class BoxResidualCache {
public:
    BoxResidualCache(const HankelBundle& bundle, double big_m)
        : bundle_(bundle), big_m_(big_m) {}

    double residual(int agent, uint32_t mask_with_self) {
        const uint64_t key =
            (static_cast<uint64_t>(agent) << 32) | (mask_with_self | (1u << agent));
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double r = fit_agent_masked_box(bundle_, agent, mask_with_self, big_m_).residual;
        cache_.emplace(key, r);
        return r;
    }

private:
    const HankelBundle& bundle_;
    double big_m_;
    std::unordered_map<uint64_t, double> cache_;
};

OptimizationResult assemble_result(const HankelBundle& bundle,
                                   const std::vector<RowChoice>& rows, double big_m,
                                   bool box_fit) {
    const int M = bundle.M;
    Topology topo(M);
    for (int i = 0; i < M; ++i) topo.set_row_from_mask(i, rows[static_cast<size_t>(i)].mask);

    OptimizationResult out;
    out.topology = topo;
    if (box_fit) {
        // Re-fit under the box so the reported predictor matches the leaf
        // evaluations.
        Mat k = Mat::Zero(bundle.p_total() * bundle.N, bundle.z_rows());
        for (int i = 0; i < M; ++i) {
            const uint32_t mask = rows[static_cast<size_t>(i)].mask;
            const MaskedFit fit = fit_agent_masked_box(bundle, i, mask, big_m);
            scatter_masked_fit(k, bundle, i, mask, fit.k);
        }
        out.predictor = Predictor(std::move(k), bundle, topo);
    } else {
        out.predictor = fit_structured(bundle, topo);
    }

    double obj = 0.0, res = 0.0, cost = 0.0;
    for (int i = 0; i < M; ++i) {
        const auto& r = rows[static_cast<size_t>(i)];
        obj += r.cost + r.residual;
        res += r.residual;
        cost += r.cost;
        out.per_agent_residual.push_back(r.residual);
    }
    out.objective = obj;
    out.residual = res;
    out.link_cost = cost;
    out.max_abs_entry = out.predictor.k().size() ? out.predictor.k().cwiseAbs().maxCoeff() : 0.0;
    out.big_m_exceeded = out.max_abs_entry > big_m;
    return out;
}

std::vector<RowChoice> solve_decomposed(const HankelBundle& bundle, const LinkCostMatrix& costs,
                                        const OptimizerConfig& cfg, ResidualCache& cache) {
    const int M = bundle.M;
    std::vector<RowChoice> rows;
    for (int i = 0; i < M; ++i) {
        const uint32_t others = (((1u << M) - 1u)) & ~(1u << i);
        RowChoice best;
        bool have = false;
        // Enumerate subsets of the other agents (submask trick hits them all).
        uint32_t sub = others;
        for (;;) {
            RowChoice cand;
            cand.mask = sub | (1u << i);
            cand.cost = costs.row_cost(i, cand.mask);
            cand.residual = cache.residual(i, cand.mask);
            if (!have || row_better(cand, best, i, cfg.tie_tol)) {
                best = cand;
                have = true;
            }
            if (sub == 0) break;
            sub = (sub - 1) & others;
        }
        rows.push_back(best);
    }
    return rows;
}

struct ExhaustiveOutcome {
    std::vector<RowChoice> rows;
    double best_objective = 0.0;
    double second_objective = std::numeric_limits<double>::infinity();
};

ExhaustiveOutcome solve_exhaustive(const HankelBundle& bundle, const LinkCostMatrix& costs,
                                   const OptimizerConfig& cfg, ResidualCache& cache) {
    const int M = bundle.M;
    if (M > 5)
        throw precondition_error("optimize: exhaustive mode supports at most 5 agents");

    // Precompute every per-agent choice once; the search below still ranges
    // over full topologies without assuming separability of the argmin.
    std::vector<std::vector<RowChoice>> choices(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
        const uint32_t others = (((1u << M) - 1u)) & ~(1u << i);
        uint32_t sub = others;
        for (;;) {
            RowChoice c;
            c.mask = sub | (1u << i);
            c.cost = costs.row_cost(i, c.mask);
            c.residual = cache.residual(i, c.mask);
            choices[static_cast<size_t>(i)].push_back(c);
            if (sub == 0) break;
            sub = (sub - 1) & others;
        }
    }

    auto global_better = [&](const std::vector<RowChoice>& cand, double cand_obj,
                             const std::vector<RowChoice>& best, double best_obj) {
        if (cand_obj < best_obj - cfg.tie_tol) return true;
        if (cand_obj > best_obj + cfg.tie_tol) return false;
        int cl = 0, bl = 0;
        for (int i = 0; i < M; ++i) {
            cl += cand[static_cast<size_t>(i)].links(i);
            bl += best[static_cast<size_t>(i)].links(i);
        }
        if (cl != bl) return cl < bl;
        for (int i = 0; i < M; ++i) {
            const uint32_t a = cand[static_cast<size_t>(i)].mask;
            const uint32_t b = best[static_cast<size_t>(i)].mask;
            if (a != b) return mask_lex_smaller(a, b);
        }
        return false;
    };

    ExhaustiveOutcome out;
    std::vector<RowChoice> current(static_cast<size_t>(M));
    bool have = false;

    // Depth-first product over per-agent choices = all 2^(M(M-1)) topologies.
    std::vector<size_t> idx(static_cast<size_t>(M), 0);
    for (;;) {
        double obj = 0.0;
        for (int i = 0; i < M; ++i) {
            current[static_cast<size_t>(i)] = choices[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
            obj += current[static_cast<size_t>(i)].total();
        }
        if (!have) {
            out.rows = current;
            out.best_objective = obj;
            have = true;
        } else if (global_better(current, obj, out.rows, out.best_objective)) {
            out.second_objective = std::min(out.second_objective, out.best_objective);
            out.rows = current;
            out.best_objective = obj;
        } else {
            out.second_objective = std::min(out.second_objective, obj);
        }
        // odometer increment
        int pos = 0;
        while (pos < M) {
            if (++idx[static_cast<size_t>(pos)] < choices[static_cast<size_t>(pos)].size()) break;
            idx[static_cast<size_t>(pos)] = 0;
            ++pos;
        }
        if (pos == M) break;
    }
    return out;
}

struct BnbNode {
    std::vector<int8_t> state;  // per link: -1 free, 0 dropped, 1 kept
    double lower_bound = 0.0;
    int depth = 0;
};

std::vector<RowChoice> solve_branch_and_bound(const HankelBundle& bundle,
                                              const LinkCostMatrix& costs,
                                              const OptimizerConfig& cfg) {
    const int M = bundle.M;
    if (M > 5)
        throw precondition_error("optimize: branch_and_bound mode supports at most 5 agents");
    BoxResidualCache cache(bundle, cfg.big_m);

    std::vector<std::pair<int, int>> links;  // row-major off-diagonal order
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            if (i != j) links.emplace_back(i, j);
    const int n_links = static_cast<int>(links.size());

    auto row_masks = [&](const std::vector<int8_t>& state, bool optimistic) {
        // optimistic: free links count as present (valid relaxation support).
        std::vector<uint32_t> masks(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) masks[static_cast<size_t>(i)] = 1u << i;
        for (int l = 0; l < n_links; ++l) {
            const auto [i, j] = links[static_cast<size_t>(l)];
            const int8_t s = state[static_cast<size_t>(l)];
            if (s == 1 || (optimistic && s == -1))
                masks[static_cast<size_t>(i)] |= 1u << j;
        }
        return masks;
    };

    auto node_bound = [&](const std::vector<int8_t>& state) {
        // Kept-link costs plus box residuals on the optimistic support lower
        // bound every completion: dropping more links can only raise the
        // residual, and free links contribute nonnegative cost.
        double lb = 0.0;
        for (int l = 0; l < n_links; ++l)
            if (state[static_cast<size_t>(l)] == 1) {
                const auto [i, j] = links[static_cast<size_t>(l)];
                lb += costs.c(i, j);
            }
        const auto masks = row_masks(state, true);
        for (int i = 0; i < M; ++i) lb += cache.residual(i, masks[static_cast<size_t>(i)]);
        return lb;
    };

    auto leaf_rows = [&](const std::vector<int8_t>& state) {
        const auto masks = row_masks(state, false);
        std::vector<RowChoice> rows;
        for (int i = 0; i < M; ++i) {
            RowChoice r;
            r.mask = masks[static_cast<size_t>(i)];
            r.cost = costs.row_cost(i, r.mask);
            r.residual = cache.residual(i, r.mask);
            rows.push_back(r);
        }
        return rows;
    };

    auto rows_obj = [&](const std::vector<RowChoice>& rows) {
        double obj = 0.0;
        for (const auto& r : rows) obj += r.total();
        return obj;
    };

    auto global_better = [&](const std::vector<RowChoice>& cand,
                             const std::vector<RowChoice>& best) {
        const double co = rows_obj(cand), bo = rows_obj(best);
        if (co < bo - cfg.tie_tol) return true;
        if (co > bo + cfg.tie_tol) return false;
        int cl = 0, bl = 0;
        for (int i = 0; i < M; ++i) {
            cl += cand[static_cast<size_t>(i)].links(i);
            bl += best[static_cast<size_t>(i)].links(i);
        }
        if (cl != bl) return cl < bl;
        for (int i = 0; i < M; ++i)
            if (cand[static_cast<size_t>(i)].mask != best[static_cast<size_t>(i)].mask)
                return mask_lex_smaller(cand[static_cast<size_t>(i)].mask,
                                        best[static_cast<size_t>(i)].mask);
        return false;
    };

    auto cmp = [](const BnbNode& a, const BnbNode& b) { return a.lower_bound > b.lower_bound; };
    std::priority_queue<BnbNode, std::vector<BnbNode>, decltype(cmp)> queue(cmp);

    BnbNode root;
    root.state.assign(static_cast<size_t>(n_links), -1);
    root.lower_bound = node_bound(root.state);
    queue.push(root);

    std::vector<RowChoice> incumbent;
    bool have = false;
    double incumbent_obj = std::numeric_limits<double>::infinity();

    while (!queue.empty()) {
        BnbNode node = queue.top();
        queue.pop();
        if (have && node.lower_bound > incumbent_obj + cfg.tie_tol) continue;
        if (node.depth == n_links) {
            auto rows = leaf_rows(node.state);
            if (!have || global_better(rows, incumbent)) {
                incumbent = std::move(rows);
                incumbent_obj = rows_obj(incumbent);
                have = true;
            }
            continue;
        }
        for (int8_t v : {static_cast<int8_t>(0), static_cast<int8_t>(1)}) {
            BnbNode child;
            child.state = node.state;
            child.state[static_cast<size_t>(node.depth)] = v;
            child.depth = node.depth + 1;
            child.lower_bound = node_bound(child.state);
            if (!have || child.lower_bound <= incumbent_obj + cfg.tie_tol) queue.push(child);
        }
    }
    return incumbent;
}

}  // namespace

OptimizationResult optimize(const HankelBundle& bundle, const LinkCostMatrix& costs,
                            const OptimizerConfig& cfg) {
    if (bundle.M < 1 || bundle.L < 1) throw precondition_error("optimize: empty bundle");
    costs.validate();
    if (costs.size() != bundle.M)
        throw precondition_error("optimize: cost matrix size does not match the bundle");

    switch (cfg.mode) {
        case OptimizerConfig::Mode::decomposed_exact: {
            ResidualCache cache(bundle);
            const auto rows = solve_decomposed(bundle, costs, cfg, cache);
            return assemble_result(bundle, rows, cfg.big_m, false);
        }
        case OptimizerConfig::Mode::exhaustive: {
            ResidualCache cache(bundle);
            const auto out = solve_exhaustive(bundle, costs, cfg, cache);
            OptimizationResult res = assemble_result(bundle, out.rows, cfg.big_m, false);
            res.second_objective = out.second_objective;
            return res;
        }
        case OptimizerConfig::Mode::branch_and_bound: {
            const auto rows = solve_branch_and_bound(bundle, costs, cfg);
            return assemble_result(bundle, rows, cfg.big_m, true);
        }
    }
    throw precondition_error("optimize: unknown mode");
}

ObjectiveBreakdown objective(const HankelBundle& bundle, const LinkCostMatrix& costs,
                             const Topology& topo) {
    if (topo.size() != bundle.M)
        throw precondition_error("objective: topology size does not match the bundle");
    costs.validate();
    ObjectiveBreakdown out;
    for (int i = 0; i < bundle.M; ++i) {
        const uint32_t mask = topo.row_mask_with_self(i);
        const double res = fit_agent_masked(bundle, i, mask).residual;
        const double cost = costs.row_cost(i, mask);
        out.per_agent_residual.push_back(res);
        out.residual += res;
        out.link_cost += cost;
        out.total += cost + res;
    }
    return out;
}

BoundsReport bounds_report(const HankelBundle& bundle, const LinkCostMatrix& costs,
                           const OptimizationResult& result, const Mat& q_weight) {
    const int dim = bundle.p_total() * bundle.N;
    if (q_weight.rows() != dim || q_weight.cols() != dim)
        throw precondition_error("bounds_report: Q must be p_total*N square");
    if ((q_weight - q_weight.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, q_weight.cwiseAbs().maxCoeff()))
        throw precondition_error("bounds_report: Q must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(q_weight, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin < -1e-10 * std::max(1.0, lmax))
        throw precondition_error("bounds_report: Q must be positive semidefinite");

    BoundsReport rep;
    const Mat z = bundle.z();
    const Mat pi = pinv(z) * z;
    rep.baseline_residual = (bundle.yf - bundle.yf * pi).squaredNorm();
    rep.dropped_link_cost = costs.dropped_cost(result.topology);
    rep.upper_bound = rep.baseline_residual + rep.dropped_link_cost;
    rep.achieved_residual = result.residual;
    rep.lower_slack = rep.achieved_residual - rep.baseline_residual;
    rep.upper_slack = rep.upper_bound - rep.achieved_residual;
    rep.sandwich_ok = rep.lower_slack >= -1e-9 && rep.upper_slack >= -1e-9;
    rep.lambda_q_max = std::max(0.0, lmax);
    rep.weighted_window_bound = rep.lambda_q_max * rep.upper_bound;
    return rep;
}

namespace {

WeightedErrorCheck run_weighted_check(const std::vector<Vec>& errors, const Mat& q_weight,
                                      double bound) {
    WeightedErrorCheck chk;
    chk.bound = bound;
    chk.samples = static_cast<int>(errors.size());
    const double slack = 1e-9 * std::max(1.0, bound);
    for (const Vec& e : errors) {
        const double v = e.dot(q_weight * e);
        chk.max_observed = std::max(chk.max_observed, v);
        if (v > bound + slack) ++chk.violations;
    }
    chk.ok = chk.violations == 0;
    return chk;
}

}  // namespace

WeightedErrorCheck check_weighted_error_bound_training(const Predictor& k,
                                                       const HankelBundle& bundle,
                                                       const Mat& q_weight, double bound,
                                                       int n_samples, uint64_t seed) {
    if (n_samples < 1)
        throw precondition_error("check_weighted_error_bound: n_samples must be >= 1");
    const Mat z = bundle.z();
    const Mat err = bundle.yf - k.k() * z;
    Rng rng(seed);
    std::vector<Vec> errors;
    errors.reserve(static_cast<size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) errors.push_back(err.col(rng.uniform_int(bundle.L)));
    return run_weighted_check(errors, q_weight, bound);
}

WeightedErrorCheck check_weighted_error_bound_fresh(const Predictor& k,
                                                    const NetworkedSystem& sys,
                                                    const Mat& q_weight, double bound,
                                                    int n_samples, const NoiseSpec& noise,
                                                    uint64_t seed) {
    if (n_samples < 1)
        throw precondition_error("check_weighted_error_bound: n_samples must be >= 1");
    const int span = k.T_ini() + k.N();
    const int T = std::max(200, span + n_samples);
    const Mat u = generate_pe_input(sys.m_total(), T, 1.0, derive_seed(seed, 11));
    NoiseSpec local = noise;
    local.seed = derive_seed(seed, 12);
    const Trajectory traj = simulate(sys, u, Vec::Zero(sys.n_total()), local);
    Rng rng(derive_seed(seed, 13));
    std::vector<Vec> errors;
    errors.reserve(static_cast<size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        const int start = rng.uniform_int(T - span + 1);
        const PredictionWindow w = window_from_trajectory(traj, start, k.T_ini(), k.N(), true);
        errors.push_back(predict(k, w) - *w.y_future);
    }
    return run_weighted_check(errors, q_weight, bound);
}

std::vector<OptimizationResult> cost_sweep(const HankelBundle& bundle,
                                           const std::vector<double>& c_values,
                                           const OptimizerConfig& cfg) {
    std::vector<OptimizationResult> out;
    out.reserve(c_values.size());
    for (double c : c_values) {
        OptimizationResult r = optimize(bundle, LinkCostMatrix::uniform(bundle.M, c), cfg);
        r.c_value = c;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace commtopo
