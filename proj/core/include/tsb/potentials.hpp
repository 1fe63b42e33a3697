#pragma once

#include <Eigen/Dense>

namespace tsb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
// Row-major layout so per-sample rows of batch tables are contiguous.
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dual variables (alpha, beta) in R^{n+m}. All dual quantities depend on them
// only through the sums alpha_i + beta_j, so two pairs related by
// (alpha + r*1, beta - r*1) are interchangeable; the quotient norms below
// vanish exactly on such shifts.
struct DualPotentials {
  Vec alpha;
  Vec beta;
};

// l2 norm of the n x m matrix (d_alpha_i + d_beta_j) of the difference p - q.
double norm_l2_oplus(const DualPotentials& p, const DualPotentials& q);

// max_{i,j} |d_alpha_i + d_beta_j|, computed as
// max{ max(d_alpha) + max(d_beta), -min(d_alpha) - min(d_beta) }.
double norm_linf_oplus(const DualPotentials& p, const DualPotentials& q);

// f(x) = max_i (<x, p_i> + offset_i); convex piecewise affine.
double max_affine(const Eigen::Ref<const Vec>& x, const Mat& points,
                  const Vec& offsets);

// argmax of the affine pieces at x; exact ties resolved to the lowest index.
int cell_index(const Eigen::Ref<const Vec>& x, const Mat& points,
               const Vec& offsets);

// (1/lambda) * log sum_i exp(lambda * (<x, p_i> + offset_i)). Max-subtracted,
// so no intermediate overflows for |lambda * term| up to ~1e6. Decreases to
// max_affine as lambda grows.
double log_smooth_potential(const Eigen::Ref<const Vec>& x, const Mat& points,
                            const Vec& offsets, double lambda);

// Canonical class representative with mean(alpha) == mean(beta); idempotent.
DualPotentials gauge_fix(const DualPotentials& p);

// Row kernels over precomputed inner products <x, p_i> (used by the Monte
// Carlo estimators; `dots` points at one contiguous row of a batch-times-
// support product).
double max_affine_row(const double* dots, const double* offsets, int n,
                      int* argmax);
double log_smooth_row(const double* dots, const double* offsets, int n,
                      double lambda);

}  // namespace tsb
