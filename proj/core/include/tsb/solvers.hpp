#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsb/estimators.hpp"

namespace tsb {

struct GradientAscentConfig {
  double step_size = 0.01;
  int max_iters = 2000;
  double grad_tol = 0.0;  // 0 disables the tolerance stop
  int batch_size = 8000;
  std::uint64_t seed = 0;
  double eps = 1.0;
  bool refresh_batch = false;  // default: one frozen batch for the whole run
  // Per-iteration batches have heavy-tailed mass estimates for small eps (a
  // single sample within sqrt(eps) of a support pair carries weight of order
  // eps^-d). A positive value clips each scale-free marginal defect
  // eps * dU entry at this bound before stepping; 0 disables the clip.
  // Binds only on such spikes; the frozen-batch path never clips.
  double defect_clip = 0.0;
  int n_threads = 1;
};

struct SinkhornConfig {
  double lambda = 10.0;  // must be > 2
  int max_iters = 500;
  double fixed_point_tol = 0.0;  // l_inf-oplus residual; 0 disables
  int batch_size = 8000;
  std::uint64_t seed = 0;
  bool refresh_batch = false;
  int n_threads = 1;
};

enum class Termination {
  max_iters,
  grad_tol,
  fixed_point_tol,
  nonfinite_iterate,
};

const char* to_string(Termination t);

struct TraceEntry {
  int iter = 0;
  double objective = 0.0;
  double objective_se = 0.0;
  // Fixed-batch gradient l2 norm (gradient ascent) or the fixed-point
  // residual ||Psi(p) - p|| in l_inf-oplus (Sinkhorn iteration).
  double grad_or_step_norm = 0.0;
  // Distance to the final iterate, filled after the run.
  double residual_l2 = 0.0;
  double residual_linf = 0.0;
  bool fallback = false;  // step size was halved at this iteration
};

struct SolveTrace {
  std::vector<TraceEntry> entries;     // entry t describes the t-th iterate
  std::vector<DualPotentials> iterates;  // same indexing as entries
  DualPotentials final;
  Termination termination = Termination::max_iters;
  bool overflow_flagged = false;  // any estimator call hit the exponent cap
  double final_step_size = 0.0;   // gradient ascent only, after fallbacks
};

// Fixed-step ascent (alpha, beta) += eta * grad U^eps, estimated on the
// batch. On a frozen batch a step that decreases the objective is retried
// with a halved step size (recorded as a fallback). Entry 0 is the initial
// point, so traces have max_iters + 1 entries when no tolerance stop fires.
std::pair<DualPotentials, SolveTrace> solve_gradient_ascent(
    const Problem& prob, const DualPotentials& init,
    const GradientAscentConfig& cfg);

// Same, reusing a caller-provided frozen batch context (common random
// numbers across solver runs); cfg.batch_size/seed/refresh_batch ignored.
std::pair<DualPotentials, SolveTrace> solve_gradient_ascent(
    const Problem& prob, const DualPotentials& init,
    const GradientAscentConfig& cfg, const BatchContext& ctx);

// Jacobi fixed-point iteration of the smoothed dual: both blocks are updated
// simultaneously from the current pair,
//   alpha_i <- (log a_i - log I_i(alpha, beta)) / lambda,
//   beta_j  <- (log b_j - log J_j(alpha, beta)) / lambda.
std::pair<DualPotentials, SolveTrace> solve_sinkhorn(const Problem& prob,
                                                     const DualPotentials& init,
                                                     const SinkhornConfig& cfg);
std::pair<DualPotentials, SolveTrace> solve_sinkhorn(const Problem& prob,
                                                     const DualPotentials& init,
                                                     const SinkhornConfig& cfg,
                                                     const BatchContext& ctx);

DualPotentials zero_potentials(const Problem& prob);

}  // namespace tsb
