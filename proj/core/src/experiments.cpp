#include "tsb/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsb/rng.hpp"

namespace tsb {

namespace {

// Largest admissible single-sample displacement of the expansion residuals
// per stochastic step (see the step-size cap in run_blowup_sweep).
constexpr double kSweepStepSafety = 0.05;

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  LineFit fit;
  if (n < 2) return fit;
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// Warm start for the next penalty: keep the expansion residual (p, q) of the
// solved potentials and re-center it on the new eps, so every exponent stays
// within range along the sweep.
DualPotentials shift_expansion(const Problem& prob, const DualPotentials& solved,
                               double eps_from, double eps_to) {
  const double d = static_cast<double>(prob.dim());
  const Vec half_sq_x = 0.5 * prob.mu.points().rowwise().squaredNorm();
  const Vec half_sq_y = 0.5 * prob.nu.points().rowwise().squaredNorm();
  const double c_from = 0.5 * d * eps_from * std::log(eps_from);
  const double c_to = 0.5 * d * eps_to * std::log(eps_to);
  const double ratio = eps_to / eps_from;
  DualPotentials out;
  out.alpha = -half_sq_x.array() - c_to +
              ratio * (solved.alpha.array() + half_sq_x.array() + c_from);
  out.beta = -half_sq_y.array() - c_to +
             ratio * (solved.beta.array() + half_sq_y.array() + c_from);
  return out;
}

}  // namespace

BlowupResult run_blowup_sweep(const Problem& prob, const BlowupConfig& cfg) {
  if (cfg.eps_list.empty()) {
    throw std::invalid_argument("run_blowup_sweep: empty eps list");
  }
  for (std::size_t k = 0; k < cfg.eps_list.size(); ++k) {
    if (!(cfg.eps_list[k] > 0.0) ||
        (k > 0 && cfg.eps_list[k] >= cfg.eps_list[k - 1])) {
      throw std::invalid_argument(
          "run_blowup_sweep: eps list must be strictly decreasing and positive");
    }
  }

  BlowupResult result;
  const BlowupReference ref = blowup_reference_values(prob);
  result.reference_slope = -static_cast<double>(prob.dim());
  result.reference_entropy = ref.bridge.entropy;
  result.reference_coupling = ref.bridge.coupling;

  // One frozen batch shared by every leg: comparisons across eps are then
  // common-random-number comparisons.
  const BatchContext ctx(prob,
                         sample(prob.ref, cfg.solver.batch_size, cfg.solver.seed),
                         cfg.solver.n_threads);

  DualPotentials warm = zero_potentials(prob);
  double prev_eps = 0.0;
  for (std::size_t k = 0; k < cfg.eps_list.size(); ++k) {
    const double eps = cfg.eps_list[k];
    if (k > 0) {
      warm = shift_expansion(prob, warm, prev_eps, eps);
    }
    GradientAscentConfig leg_cfg = cfg.solver;
    leg_cfg.eps = eps;
    // Per-iteration batches: a frozen batch cannot resolve scales below
    // sqrt(eps) and its surrogate optimizer drifts away from the true one,
    // while stochastic ascent hovers around it with Monte Carlo noise.
    // Batches are redrawn from the same sub-seed sequence on every leg.
    leg_cfg.refresh_batch = true;
    // The eps-scaled objective has curvature of order eps^-2 near its
    // optimizer (linear terms and cell masses both carry 1/eps), so the
    // stable step shrinks like eps^2. On top of that, a single sample
    // within sqrt(eps) of a support pair carries weight of order
    // eps^-d / N, so steps are capped so that one such sample cannot move
    // the expansion residuals by more than a bounded amount: below the
    // batch resolution eps^d ~ 1/N the legs stay near their warm start
    // (and their certificates report exactly that).
    const double speed_limit =
        kSweepStepSafety * cfg.solver.batch_size *
        std::pow(eps, static_cast<double>(prob.dim()));
    leg_cfg.step_size =
        std::min(cfg.solver.step_size, speed_limit) * eps * eps;
    auto [last_iterate, trace] = solve_gradient_ascent(prob, warm, leg_cfg, ctx);
    (void)last_iterate;

    // Tail average over the final fifth of the run; under per-iteration
    // batch noise the averaged iterate estimates the stationary point with
    // far less variance than the last iterate.
    const std::size_t tail =
        std::max<std::size_t>(1, trace.iterates.size() / 5);
    DualPotentials pots{Vec::Zero(prob.n()), Vec::Zero(prob.m())};
    for (std::size_t t = trace.iterates.size() - tail; t < trace.iterates.size(); ++t) {
      pots.alpha += trace.iterates[t].alpha;
      pots.beta += trace.iterates[t].beta;
    }
    pots.alpha /= static_cast<double>(tail);
    pots.beta /= static_cast<double>(tail);

    SweepLeg leg;
    leg.eps = eps;
    leg.pots = pots;
    leg.i_eps = primal_value_from_duals(prob, pots, eps);
    // Scatter of the primal value across the tail iterates; the iterates are
    // autocorrelated, so this is kept unreduced as a conservative error bar
    // for the averaged value.
    {
      double s = 0.0, s2 = 0.0;
      for (std::size_t t = trace.iterates.size() - tail; t < trace.iterates.size(); ++t) {
        const double v = primal_value_from_duals(prob, trace.iterates[t], eps);
        s += v;
        s2 += v * v;
      }
      const double mean = s / static_cast<double>(tail);
      leg.i_eps_se = std::sqrt(
          std::max(0.0, s2 / static_cast<double>(tail) - mean * mean));
    }

    // Stationarity certificate: the gradient averaged over independent
    // replicate batches must vanish within five standard errors of that
    // mean (or the configured floor) in the scale-free marginal units.
    constexpr int kReplicates = 25;
    Vec mean_a = Vec::Zero(prob.n()), mean_b = Vec::Zero(prob.m());
    Vec sq_a = Vec::Zero(prob.n()), sq_b = Vec::Zero(prob.m());
    bool replicate_overflow = false;
    const std::uint64_t cert_seed =
        SplitMix64::derive(cfg.solver.seed, 0xCE57u + static_cast<std::uint64_t>(k));
    for (int r = 0; r < kReplicates; ++r) {
      const BatchContext rep_ctx(
          prob,
          sample(prob.ref, cfg.solver.batch_size,
                 SplitMix64::derive(cert_seed, static_cast<std::uint64_t>(r))),
          cfg.solver.n_threads);
      const DualEvaluation ev = evaluate_dual(prob, pots, eps, rep_ctx);
      replicate_overflow = replicate_overflow || !ev.gradient.reliable;
      mean_a += ev.gradient.d_alpha;
      mean_b += ev.gradient.d_beta;
      sq_a += ev.gradient.d_alpha.cwiseAbs2();
      sq_b += ev.gradient.d_beta.cwiseAbs2();
    }
    mean_a /= kReplicates;
    mean_b /= kReplicates;
    auto se_of_mean = [&](const Vec& sq, const Vec& mean) {
      return ((sq.array() / kReplicates - mean.array().square()).max(0.0) /
              (kReplicates - 1))
          .sqrt()
          .matrix();
    };
    const Vec se_a = se_of_mean(sq_a, mean_a);
    const Vec se_b = se_of_mean(sq_b, mean_b);
    leg.grad_norm = std::sqrt(mean_a.squaredNorm() + mean_b.squaredNorm());
    leg.marginal_violation =
        eps * std::max(mean_a.cwiseAbs().maxCoeff(), mean_b.cwiseAbs().maxCoeff());
    const double noise_scale =
        5.0 * eps * std::max(se_a.maxCoeff(), se_b.maxCoeff());

    leg.masses = cell_mass_matrix(prob, pots, eps, ctx);
    leg.costs = marginal_transport_cost(prob, pots, eps, ctx);
    leg.overflow_flagged =
        trace.overflow_flagged || replicate_overflow || !leg.masses.reliable;
    leg.certified = !leg.overflow_flagged &&
                    leg.marginal_violation <=
                        std::max(cfg.cert_violation_tol, noise_scale);
    for (const TraceEntry& e : trace.entries) {
      if (e.fallback) ++leg.fallback_iters;
    }
    result.legs.push_back(std::move(leg));
    warm = std::move(pots);
    prev_eps = eps;
  }

  std::vector<double> xs, ys;
  for (const SweepLeg& leg : result.legs) {
    if (leg.certified) {
      xs.push_back(std::log(leg.eps));
      ys.push_back(leg.i_eps);
    }
  }
  if (cfg.fit_smallest_k > 0 && static_cast<int>(xs.size()) > cfg.fit_smallest_k) {
    // eps_list is decreasing, so the smallest eps sit at the back.
    xs.erase(xs.begin(), xs.end() - cfg.fit_smallest_k);
    ys.erase(ys.begin(), ys.end() - cfg.fit_smallest_k);
  }
  const LineFit fit = ols(xs, ys);
  result.slope = fit.slope;
  result.intercept = fit.intercept;
  result.fit_points = static_cast<int>(xs.size());
  return result;
}

DecayFit fit_residual_decay(const std::vector<double>& residuals) {
  DecayFit fit;
  if (residuals.size() < 3) return fit;
  // Noise floor: median residual over the final tenth of the trace.
  const std::size_t tail =
      std::max<std::size_t>(3, residuals.size() / 10);
  std::vector<double> last(residuals.end() - static_cast<std::ptrdiff_t>(tail),
                           residuals.end());
  std::sort(last.begin(), last.end());
  const double median = last[last.size() / 2];
  fit.noise_floor = std::max(median, 1e-14 * (1.0 + residuals.front()));

  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < residuals.size(); ++t) {
    if (residuals[t] > 10.0 * fit.noise_floor) {
      xs.push_back(static_cast<double>(t));
      ys.push_back(std::log(residuals[t]));
    }
  }
  fit.window_size = static_cast<int>(xs.size());
  const LineFit line = ols(xs, ys);
  fit.slope = line.slope;
  fit.r2 = line.r2;
  fit.theta = std::exp(line.slope);
  return fit;
}

namespace {

std::vector<double> l2_residuals(const SolveTrace& trace) {
  std::vector<double> r;
  r.reserve(trace.entries.size());
  for (const TraceEntry& e : trace.entries) r.push_back(e.residual_l2);
  return r;
}

std::vector<double> linf_residuals(const SolveTrace& trace) {
  std::vector<double> r;
  r.reserve(trace.entries.size());
  for (const TraceEntry& e : trace.entries) r.push_back(e.residual_linf);
  return r;
}

}  // namespace

ConvergenceStudy run_ga_convergence(const Problem& prob,
                                    const GradientAscentConfig& cfg) {
  ConvergenceStudy study;
  auto [pots, trace] = solve_gradient_ascent(prob, zero_potentials(prob), cfg);
  (void)pots;
  study.fit = fit_residual_decay(l2_residuals(trace));
  study.trace = std::move(trace);
  return study;
}

ConvergenceStudy run_sinkhorn_convergence(const Problem& prob,
                                          const SinkhornConfig& cfg) {
  ConvergenceStudy study;
  auto [pots, trace] = solve_sinkhorn(prob, zero_potentials(prob), cfg);
  (void)pots;
  study.fit = fit_residual_decay(linf_residuals(trace));
  study.trace = std::move(trace);
  return study;
}

PartitionGrid export_partition(const Problem& prob, const DualPotentials& pots,
                               double lo, double hi, int resolution,
                               int n_overlay, std::uint64_t seed) {
  if (prob.dim() != 2) {
    throw std::invalid_argument("export_partition: only d = 2 is supported");
  }
  if (resolution < 2 || !(hi > lo)) {
    throw std::invalid_argument("export_partition: invalid grid");
  }
  if (pots.alpha.size() != prob.n() || pots.beta.size() != prob.m()) {
    throw std::invalid_argument("export_partition: potential shape mismatch");
  }

  PartitionGrid grid;
  grid.lo = lo;
  grid.hi = hi;
  grid.resolution = resolution;
  grid.index_x.resize(static_cast<std::size_t>(resolution) * resolution);
  grid.index_y.resize(static_cast<std::size_t>(resolution) * resolution);

  const double step = (hi - lo) / (resolution - 1);
  auto active_index = [&](const Mat& points, const Vec& offsets, double gx,
                          double gy) {
    Vec z(2);
    z << gx, gy;
    const int idx = cell_index(z, points, offsets);
    // Definition re-check: the reported piece must attain the max.
    const double attained = points.row(idx).dot(z) + offsets[idx];
    for (int i = 0; i < points.rows(); ++i) {
      if (points.row(i).dot(z) + offsets[i] > attained) {
        throw std::logic_error("export_partition: active index does not attain the max");
      }
    }
    return idx;
  };

  for (int iy = 0; iy < resolution; ++iy) {
    const double gy = lo + step * iy;
    for (int ix = 0; ix < resolution; ++ix) {
      const double gx = lo + step * ix;
      const std::size_t at = static_cast<std::size_t>(iy) * resolution + ix;
      grid.index_x[at] = active_index(prob.mu.points(), pots.alpha, gx, gy);
      grid.index_y[at] = active_index(prob.nu.points(), pots.beta, gx, gy);
    }
  }

  // Both marginals of the reference are isotropic unit Gaussians around the
  // respective means.
  grid.overlay_x.resize(n_overlay, 2);
  grid.overlay_y.resize(n_overlay, 2);
  SplitMix64 gen(seed);
  for (int k = 0; k < n_overlay; ++k) {
    for (int c = 0; c < 2; ++c) {
      grid.overlay_x(k, c) = prob.ref.mean_x()[c] + gen.next_normal();
    }
    for (int c = 0; c < 2; ++c) {
      grid.overlay_y(k, c) = prob.ref.mean_y()[c] + gen.next_normal();
    }
  }
  return grid;
}

}  // namespace tsb
