#pragma once

#include <vector>

namespace commtopo {

double mean(const std::vector<double>& xs);

/// Population variance (divide by n).
double variance(const std::vector<double>& xs);

/// Kendall tau-a over paired samples: (concordant - discordant) / total pairs.
double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys);

/// Two-sided normal-approximation p-value for kendall_tau under independence.
double kendall_tau_pvalue(double tau, int n);

/// Kendall tau restricted to grid-cell pairs that share the other axis value;
/// measures the monotone trend of `values` along one axis of a 2-d sweep.
double grid_axis_kendall_tau(const std::vector<double>& axis, const std::vector<double>& other,
                             const std::vector<double>& values);

/// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace commtopo
