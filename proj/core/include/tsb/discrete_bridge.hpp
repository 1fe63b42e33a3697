#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "tsb/estimators.hpp"

namespace tsb {

// Entropic projection onto couplings of (a, b) relative to a strictly
// positive discrete reference matrix sigma.
struct DiscreteBridgeProblem {
  Mat sigma;  // n x m, all entries > 0
  Vec a;      // n, positive, sums to one
  Vec b;      // m, positive, sums to one

  DiscreteBridgeProblem(Mat sigma_, Vec a_, Vec b_);
};

struct DiscreteBridgeSolution {
  Mat coupling;        // pi_ij = sigma_ij * exp(p_i + q_j)
  Vec p;               // gauge-fixed potentials, mean(p) == mean(q)
  Vec q;
  double entropy = 0;  // H(pi | sigma) = sum a_i p_i + sum b_j q_j
  int iterations = 0;
  double marginal_violation = 0;  // final l_inf marginal defect
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double violation)
      : std::runtime_error(what), last_violation(violation) {}
  double last_violation;
};

// Limit reference matrix sigma_ij = (2*pi)^d * rho(x_i, y_j); all entries
// strictly positive for the Gaussian reference.
Mat build_limit_sigma(const Problem& prob);

// Log-domain alternating updates
//   p_i <- log a_i - log sum_j sigma_ij e^{q_j},
//   q_j <- log b_j - log sum_i sigma_ij e^{p_i},
// until the l_inf marginal violation drops below tol. Throws
// ConvergenceError when max_iters is exhausted first.
DiscreteBridgeSolution solve_discrete_sinkhorn(const DiscreteBridgeProblem& dbp,
                                               double tol = 1e-12,
                                               int max_iters = 100000);

// The eps -> 0 targets: sigma, the limit coupling, its potentials, and
// H(pi|sigma).
struct BlowupReference {
  Mat sigma;
  DiscreteBridgeSolution bridge;
};
BlowupReference blowup_reference_values(const Problem& prob);

}  // namespace tsb
