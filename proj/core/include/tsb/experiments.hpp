#pragma once

#include <cstdint>
#include <vector>

#include "tsb/discrete_bridge.hpp"
#include "tsb/solvers.hpp"

namespace tsb {

// One leg of the penalty sweep: solved potentials for a single eps together
// with the value estimate and its reliability certificates.
struct SweepLeg {
  double eps = 0.0;
  double i_eps = 0.0;     // primal value from the reported potentials
  double i_eps_se = 0.0;  // scatter of the primal value over the tail iterates
  double grad_norm = 0.0;  // l2 norm of the replicate-averaged gradient
  // Scale-free stationarity defect eps * |mean grad|_inf, i.e. the l_inf
  // violation of the cell-mass marginal identities.
  double marginal_violation = 0.0;
  bool overflow_flagged = false;
  bool certified = false;  // violation within threshold/noise, no overflow
  CellMassMatrix masses;
  TransportCost costs;
  DualPotentials pots;
  int fallback_iters = 0;
};

struct BlowupConfig {
  std::vector<double> eps_list;  // strictly decreasing, positive
  GradientAscentConfig solver;   // per-leg budget; batch shared across legs
  // Certificate floor on the scale-free marginal violation; a leg is
  // certified when the replicate-averaged defect stays below this floor or
  // below five standard errors of that average, and flagged legs are
  // excluded from the slope fit.
  double cert_violation_tol = 1e-3;
  // Restrict the fit to the k smallest certified eps (0 = all certified).
  int fit_smallest_k = 0;
};

struct BlowupResult {
  std::vector<SweepLeg> legs;      // ordered as eps_list
  double slope = 0.0;              // OLS of I^eps against ln(eps)
  double intercept = 0.0;
  double reference_slope = 0.0;    // -d, the intrinsic leading coefficient
  double reference_entropy = 0.0;  // H(pi0 | sigma) from the discrete bridge
  Mat reference_coupling;          // pi0
  int fit_points = 0;
};

// Solves the eps-scaled dual along the sweep with one shared frozen batch;
// each leg is warm-started from the previous solution shifted along the
// small-eps expansion of the optimal potentials.
BlowupResult run_blowup_sweep(const Problem& prob, const BlowupConfig& cfg);

// Least-squares fit of log(residual) against the iteration index over the
// window where the residual still dominates the noise floor (10x the median
// of the final tenth of the trace).
struct DecayFit {
  double slope = 0.0;
  double r2 = 0.0;
  double theta = 1.0;  // exp(slope), per-iteration contraction factor
  int window_size = 0;
  double noise_floor = 0.0;
};
DecayFit fit_residual_decay(const std::vector<double>& residuals);

struct ConvergenceStudy {
  SolveTrace trace;
  DecayFit fit;  // on residual-to-final: l2-oplus (ascent), linf-oplus (Psi)
};
ConvergenceStudy run_ga_convergence(const Problem& prob,
                                    const GradientAscentConfig& cfg);
ConvergenceStudy run_sinkhorn_convergence(const Problem& prob,
                                          const SinkhornConfig& cfg);

// Active-index maps of the two max-affine potentials on a square grid,
// plus reference-measure marginal samples for overlay. d = 2 only.
struct PartitionGrid {
  double lo = -3.0;
  double hi = 3.0;
  int resolution = 300;       // grid points per axis
  std::vector<int> index_x;   // row-major, index_x[iy * resolution + ix]
  std::vector<int> index_y;
  Mat overlay_x;              // draws from the X marginal of the reference
  Mat overlay_y;
};
PartitionGrid export_partition(const Problem& prob, const DualPotentials& pots,
                               double lo, double hi, int resolution,
                               int n_overlay, std::uint64_t seed);

}  // namespace tsb
