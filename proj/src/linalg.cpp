#include "commtopo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "commtopo/errors.hpp"

namespace commtopo {

double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
    const double eps = std::numeric_limits<double>::epsilon();
    return static_cast<double>(std::max(rows, cols)) * eps * sigma_max;
}

int numerical_rank(const Mat& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 0;
    const double tol = rank_tolerance(a.rows(), a.cols(), s(0));
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++r;
    return r;
}

Mat pinv(const Mat& a) {
    if (a.rows() == 0 || a.cols() == 0) return Mat::Zero(a.cols(), a.rows());
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = s.size() > 0 ? rank_tolerance(a.rows(), a.cols(), s(0)) : 0.0;
    Vec sinv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) sinv(i) = 1.0 / s(i);
    return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

Mat lsq_min_norm(const Mat& z, const Mat& y) {
    if (y.cols() != z.cols())
        throw precondition_error("lsq_min_norm: y and z must share the column count");
    if (z.rows() == 0) return Mat::Zero(y.rows(), 0);
    // K = y V S^+ U^T with the tolerance rule; transpose form of the classic
    // min-norm solve, so rank deficiency in z yields the minimum-norm K.
    Eigen::JacobiSVD<Mat> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = s.size() > 0 ? rank_tolerance(z.rows(), z.cols(), s(0)) : 0.0;
    Vec sinv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) sinv(i) = 1.0 / s(i);
    return ((y * svd.matrixV()) * sinv.asDiagonal()) * svd.matrixU().transpose();
}

namespace {

// Projected gradient with Nesterov acceleration and monotone restart for
// min f(k) = k^T G k - 2 b^T k over a box. G is PSD; L = 2 lambda_max(G).
Vec box_qp_row(const Mat& g, const Vec& b, const Vec& lo, const Vec& hi, Vec k) {
    auto clamp = [&](Vec v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::min(std::max(v(i), lo(i)), hi(i));
        return v;
    };
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmax <= 0.0) return clamp(std::move(k));
    const double step = 1.0 / (2.0 * lmax);
    const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
    const double kkt_tol = 1e-11 * scale;

    k = clamp(std::move(k));
    Vec v = k;
    double t = 1.0;
    double fk = k.dot(g * k) - 2.0 * b.dot(k);
    const int max_iter = 200000;
    for (int it = 0; it < max_iter; ++it) {
        Vec grad = 2.0 * (g * k - b);
        // KKT: interior coordinates need zero gradient; bound-active ones the right sign.
        double worst = 0.0;
        for (Eigen::Index i = 0; i < k.size(); ++i) {
            double gviol;
            if (k(i) <= lo(i) + 1e-14 * scale)
                gviol = std::max(0.0, -grad(i));
            else if (k(i) >= hi(i) - 1e-14 * scale)
                gviol = std::max(0.0, grad(i));
            else
                gviol = std::abs(grad(i));
            worst = std::max(worst, gviol);
        }
        if (worst <= kkt_tol) break;

        Vec grad_v = 2.0 * (g * v - b);
        Vec knext = clamp(v - step * grad_v);
        double fnext = knext.dot(g * knext) - 2.0 * b.dot(knext);
        if (fnext > fk) {  // restart momentum
            knext = clamp(k - step * grad);
            fnext = knext.dot(g * knext) - 2.0 * b.dot(knext);
            t = 1.0;
            v = knext;
        } else {
            double tnext = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            v = knext + ((t - 1.0) / tnext) * (knext - k);
            t = tnext;
        }
        k = knext;
        fk = fnext;
    }
    return k;
}

}  // namespace

Mat box_lsq(const Mat& z, const Mat& y, const Mat& lo, const Mat& hi) {
    if (y.cols() != z.cols())
        throw precondition_error("box_lsq: y and z must share the column count");
    if (lo.rows() != y.rows() || lo.cols() != z.rows() || hi.rows() != y.rows() ||
        hi.cols() != z.rows())
        throw precondition_error("box_lsq: bound matrices must be sized like K");

    Mat k = lsq_min_norm(z, y);
    const bool feasible = (k.array() >= lo.array()).all() && (k.array() <= hi.array()).all();
    if (feasible) return k;

    const Mat g = z * z.transpose();
    const Mat bt = z * y.transpose();  // column r = b for row r
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        Vec row = k.row(r).transpose();
        if ((row.array() >= lo.row(r).transpose().array()).all() &&
            (row.array() <= hi.row(r).transpose().array()).all())
            continue;
        k.row(r) = box_qp_row(g, bt.col(r), lo.row(r).transpose(), hi.row(r).transpose(),
                              std::move(row))
                       .transpose();
    }
    return k;
}

}  // namespace commtopo
