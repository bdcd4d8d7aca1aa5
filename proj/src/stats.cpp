#include "commtopo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "commtopo/errors.hpp"

namespace commtopo {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw precondition_error("mean: empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(const std::vector<double>& xs) {
    if (xs.empty()) throw precondition_error("variance: empty sample");
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size());
}

double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw precondition_error("kendall_tau: need paired samples, n >= 2");
    long long concordant = 0, discordant = 0, total = 0;
    const size_t n = xs.size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            ++total;
            const double dx = xs[i] - xs[j];
            const double dy = ys[i] - ys[j];
            const double prod = dx * dy;
            if (prod > 0)
                ++concordant;
            else if (prod < 0)
                ++discordant;
        }
    }
    return static_cast<double>(concordant - discordant) / static_cast<double>(total);
}

double kendall_tau_pvalue(double tau, int n) {
    if (n < 2) return 1.0;
    const double var = 2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0));
    const double z = tau / std::sqrt(var);
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double grid_axis_kendall_tau(const std::vector<double>& axis, const std::vector<double>& other,
                             const std::vector<double>& values) {
    if (axis.size() != other.size() || axis.size() != values.size() || axis.size() < 2)
        throw precondition_error("grid_axis_kendall_tau: need matched samples, n >= 2");
    long long conc = 0, disc = 0;
    for (size_t a = 0; a < axis.size(); ++a)
        for (size_t b = a + 1; b < axis.size(); ++b) {
            if (other[a] != other[b]) continue;
            const double dx = axis[a] - axis[b];
            if (dx == 0.0) continue;
            const double prod = dx * (values[a] - values[b]);
            if (prod > 0)
                ++conc;
            else if (prod < 0)
                ++disc;
        }
    if (conc + disc == 0) return 0.0;
    return static_cast<double>(conc - disc) / static_cast<double>(conc + disc);
}

namespace {

std::vector<double> ranks_with_ties(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw precondition_error("spearman_rho: need paired samples, n >= 2");
    const auto rx = ranks_with_ties(xs);
    const auto ry = ranks_with_ties(ys);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace commtopo
