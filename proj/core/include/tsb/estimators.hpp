#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "tsb/measures.hpp"
#include "tsb/potentials.hpp"

namespace tsb {

// Semi-discrete problem instance: discrete marginals plus the absolutely
// continuous Gaussian reference, all in the same dimension.
struct Problem {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  GaussianReference ref;

  Problem(DiscreteMeasure mu_, DiscreteMeasure nu_, GaussianReference ref_);

  int dim() const { return ref.dim(); }
  int n() const { return mu.size(); }
  int m() const { return nu.size(); }
};

// Scalar Monte Carlo estimate with the standard error of the same batch.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  int batch_size = 0;
  std::uint64_t seed = 0;
  bool reliable = true;  // false once any sample exponent hit the cap
};

struct DualGradient {
  Vec d_alpha;
  Vec d_beta;
  bool reliable = true;
};

// Estimated joint masses of the max-affine cell pairs, i.e. the entries of
// the primal coupling restricted to A_i x B_j.
struct CellMassMatrix {
  Mat masses;          // n x m, nonnegative
  Mat std_errors;      // n x m, per-entry MC standard errors
  Vec row_std_errors;  // MC standard errors of the row sums
  Vec col_std_errors;
  double total = 0.0;  // == masses.sum()
  double ess = 0.0;    // effective sample size of the weights
  bool reliable = true;
};

struct SinkhornIntegrals {
  Vec log_i;  // log of the n alpha-side integrals
  Vec log_j;  // log of the m beta-side integrals
  bool reliable = true;
};

// Self-normalized importance estimates at (approximately) stationary
// potentials: quadratic transport costs of both marginals plus the relative
// entropy estimate (importance-weighted mean of the log-weights).
struct TransportCost {
  Estimate cost_x;
  Estimate cost_y;
  Estimate entropy;
  double ess = 0.0;
  bool reliable = true;  // false when ess < kMinEffectiveSamples
};

// Exponents above this produce exp() overflow; estimates are clamped there
// and flagged unreliable instead of turning infinite.
inline constexpr double kExponentCap = 700.0;
// Below this effective sample size a self-normalized ratio estimate is
// meaningless and gets flagged.
inline constexpr double kMinEffectiveSamples = 10.0;

// Precomputed pairing of a batch with the problem supports. All estimators
// run off the inner-product tables, so repeated evaluation on a frozen batch
// costs O(N*(n+m)) per call. Reductions are chunked with a fixed chunk size
// and merged pairwise in index order, so results are bit-identical for any
// thread count.
class BatchContext {
 public:
  BatchContext(const Problem& prob, SampleBatch batch, int n_threads = 1);

  const SampleBatch& batch() const { return batch_; }
  int size() const { return batch_.size(); }
  std::uint64_t seed() const { return batch_.seed; }
  int threads() const { return n_threads_; }

  const RowMat& dot_x() const { return dot_x_; }  // N x n, <x_k, x_i>
  const RowMat& dot_y() const { return dot_y_; }  // N x m, <y_k, y_j>
  const Vec& half_sq_x() const { return half_sq_x_; }  // |x_k|^2 / 2
  const Vec& half_sq_y() const { return half_sq_y_; }
  const Vec& support_sq_x() const { return support_sq_x_; }  // |x_i|^2
  const Vec& support_sq_y() const { return support_sq_y_; }

 private:
  SampleBatch batch_;
  RowMat dot_x_, dot_y_;
  Vec half_sq_x_, half_sq_y_;
  Vec support_sq_x_, support_sq_y_;
  int n_threads_;
};

// Monte Carlo estimate of the dual objective
//   U(a, b) = sum_i a_i (alpha_i + |x_i|^2/2) + sum_j b_j (beta_j + |y_j|^2/2)
//             - mean exp(f + g - |x|^2/2 - |y|^2/2) + 1
// and, for eps != 1, of its eps-scaled variant with exponent
// (f + g - |x|^2/2 - |y|^2/2)/eps and 1/eps on the linear terms.
Estimate dual_objective(const Problem& prob, const DualPotentials& pots,
                        const BatchContext& ctx);
Estimate dual_objective_eps(const Problem& prob, const DualPotentials& pots,
                            double eps, const BatchContext& ctx);

// Gradient of the (eps-scaled) dual objective. The alpha component is
// (a_i - mean[w * 1{cell(x) = i}])/eps with the lowest-index tie break of
// cell_index, and symmetrically in beta.
DualGradient dual_gradient(const Problem& prob, const DualPotentials& pots,
                           const BatchContext& ctx);
DualGradient dual_gradient_eps(const Problem& prob, const DualPotentials& pots,
                               double eps, const BatchContext& ctx);

// Fused objective + gradient evaluation (one pass over the batch).
struct DualEvaluation {
  Estimate objective;
  DualGradient gradient;
};
DualEvaluation evaluate_dual(const Problem& prob, const DualPotentials& pots,
                             double eps, const BatchContext& ctx);

// Log-domain fixed-point integrals of the smoothed dual: component i is
// log mean exp((1-lambda) log_phi + log_psi + lambda <x, x_i>
//              - |x|^2/2 - |y|^2/2)
// and symmetrically on the beta side, each reduced with per-component
// max-subtraction over the batch.
SinkhornIntegrals log_sinkhorn_integrals(const Problem& prob,
                                         const DualPotentials& pots,
                                         double lambda,
                                         const BatchContext& ctx);
// Exponentiated convenience variant (may underflow for very large lambda;
// the solver path stays in log domain).
std::pair<Vec, Vec> sinkhorn_integrals(const Problem& prob,
                                       const DualPotentials& pots,
                                       double lambda, const BatchContext& ctx);

CellMassMatrix cell_mass_matrix(const Problem& prob, const DualPotentials& pots,
                                double eps, const BatchContext& ctx);

// Exact arithmetic on the linear terms,
//   (sum_i a_i (alpha_i + |x_i|^2/2) + sum_j b_j (beta_j + |y_j|^2/2)) / eps;
// equals the primal optimal value only at stationary potentials, where the
// integral term is 1 and cancels the +1.
double primal_value_from_duals(const Problem& prob, const DualPotentials& pots,
                               double eps);

TransportCost marginal_transport_cost(const Problem& prob,
                                      const DualPotentials& pots, double eps,
                                      const BatchContext& ctx);

}  // namespace tsb
