#pragma once

#include <Eigen/Dense>

namespace commtopo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Singular values at or below max(rows, cols) * eps * sigma_max are treated as zero.
double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Numerical rank via SVD with the shared tolerance rule.
int numerical_rank(const Mat& a);

/// Moore-Penrose pseudoinverse via SVD with the shared tolerance rule.
Mat pinv(const Mat& a);

/// Minimum-Frobenius-norm solution of min_K ||y - K z||_F^2, i.e. K = y z^+.
/// z is q x L, y is r x L; the result is r x q. Handles row-rank-deficient z.
Mat lsq_min_norm(const Mat& z, const Mat& y);

/// Box-constrained least squares: min_K ||y - K z||_F^2 with
/// lo(i,j) <= K(i,j) <= hi(i,j). Bounds may be +-infinity. Rows of K are
/// independent problems; each is solved exactly when the unconstrained
/// minimum-norm row is feasible and by monotone projected gradient otherwise.
Mat box_lsq(const Mat& z, const Mat& y, const Mat& lo, const Mat& hi);

}  // namespace commtopo
