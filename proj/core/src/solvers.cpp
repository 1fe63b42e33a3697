#include "tsb/solvers.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "tsb/rng.hpp"

namespace tsb {

namespace {

constexpr int kMaxHalvings = 64;

bool finite(const DualPotentials& p) {
  return p.alpha.allFinite() && p.beta.allFinite();
}

void fill_residuals(SolveTrace& trace) {
  for (std::size_t t = 0; t < trace.entries.size(); ++t) {
    trace.entries[t].residual_l2 = norm_l2_oplus(trace.iterates[t], trace.final);
    trace.entries[t].residual_linf = norm_linf_oplus(trace.iterates[t], trace.final);
  }
}

BatchContext make_context(const Problem& prob, int batch_size,
                          std::uint64_t seed, int n_threads) {
  return BatchContext(prob, sample(prob.ref, batch_size, seed), n_threads);
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::max_iters: return "max_iters";
    case Termination::grad_tol: return "grad_tol";
    case Termination::fixed_point_tol: return "fixed_point_tol";
    case Termination::nonfinite_iterate: return "nonfinite_iterate";
  }
  return "unknown";
}

DualPotentials zero_potentials(const Problem& prob) {
  return {Vec::Zero(prob.n()), Vec::Zero(prob.m())};
}

std::pair<DualPotentials, SolveTrace> solve_gradient_ascent(
    const Problem& prob, const DualPotentials& init,
    const GradientAscentConfig& cfg, const BatchContext& frozen) {
  if (!(cfg.step_size > 0.0) || cfg.max_iters < 1) {
    throw std::invalid_argument("solve_gradient_ascent: invalid config");
  }
  if (!finite(init)) {
    throw std::invalid_argument("solve_gradient_ascent: non-finite init");
  }

  SolveTrace trace;
  DualPotentials p = init;
  double eta = cfg.step_size;

  auto record = [&](int t, const DualEvaluation& ev, bool fallback) {
    TraceEntry e;
    e.iter = t;
    e.objective = ev.objective.value;
    e.objective_se = ev.objective.std_error;
    e.grad_or_step_norm = std::sqrt(ev.gradient.d_alpha.squaredNorm() +
                                    ev.gradient.d_beta.squaredNorm());
    e.fallback = fallback;
    trace.entries.push_back(e);
    trace.iterates.push_back(p);
    trace.overflow_flagged =
        trace.overflow_flagged || !ev.objective.reliable || !ev.gradient.reliable;
    return e.grad_or_step_norm;
  };

  DualEvaluation ev = evaluate_dual(prob, p, cfg.eps, frozen);
  double grad_norm = record(0, ev, false);
  trace.termination = Termination::max_iters;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    if (cfg.grad_tol > 0.0 && grad_norm <= cfg.grad_tol) {
      trace.termination = Termination::grad_tol;
      break;
    }
    bool fallback = false;
    DualPotentials next{p.alpha + eta * ev.gradient.d_alpha,
                        p.beta + eta * ev.gradient.d_beta};
    if (cfg.refresh_batch) {
      if (cfg.defect_clip > 0.0) {
        const double bound = cfg.defect_clip / cfg.eps;
        next.alpha = p.alpha + eta * ev.gradient.d_alpha.cwiseMax(-bound).cwiseMin(bound);
        next.beta = p.beta + eta * ev.gradient.d_beta.cwiseMax(-bound).cwiseMin(bound);
      }
      if (!finite(next)) {
        trace.termination = Termination::nonfinite_iterate;
        break;
      }
      p = next;
      const BatchContext ctx = make_context(
          prob, frozen.size(),
          SplitMix64::derive(frozen.seed(), static_cast<std::uint64_t>(t)),
          frozen.threads());
      ev = evaluate_dual(prob, p, cfg.eps, ctx);
    } else {
      DualEvaluation ev_next;
      if (finite(next)) {
        ev_next = evaluate_dual(prob, next, cfg.eps, frozen);
      }
      // Ascent safeguard: the theoretical step-size threshold is not
      // computable, so a frozen-batch objective decrease halves eta. The
      // grain term keeps rounding jitter near the optimum from eroding eta.
      const double grain = 1e-12 * (1.0 + std::abs(ev.objective.value));
      int halvings = 0;
      while ((!finite(next) ||
              ev_next.objective.value < ev.objective.value - grain) &&
             halvings < kMaxHalvings) {
        eta *= 0.5;
        ++halvings;
        fallback = true;
        next = {p.alpha + eta * ev.gradient.d_alpha,
                p.beta + eta * ev.gradient.d_beta};
        if (finite(next)) {
          ev_next = evaluate_dual(prob, next, cfg.eps, frozen);
        }
      }
      if (!finite(next)) {
        trace.termination = Termination::nonfinite_iterate;
        break;
      }
      p = next;
      ev = ev_next;
    }
    grad_norm = record(t, ev, fallback);
  }

  trace.final = p;
  trace.final_step_size = eta;
  fill_residuals(trace);
  return {p, std::move(trace)};
}

std::pair<DualPotentials, SolveTrace> solve_gradient_ascent(
    const Problem& prob, const DualPotentials& init,
    const GradientAscentConfig& cfg) {
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("solve_gradient_ascent: batch_size must be >= 1");
  }
  return solve_gradient_ascent(
      prob, init, cfg, make_context(prob, cfg.batch_size, cfg.seed, cfg.n_threads));
}

std::pair<DualPotentials, SolveTrace> solve_sinkhorn(const Problem& prob,
                                                     const DualPotentials& init,
                                                     const SinkhornConfig& cfg,
                                                     const BatchContext& frozen) {
  if (!(cfg.lambda > 2.0)) {
    throw std::invalid_argument("solve_sinkhorn: lambda must be > 2");
  }
  if (cfg.max_iters < 1) {
    throw std::invalid_argument("solve_sinkhorn: max_iters must be >= 1");
  }
  if (!finite(init)) {
    throw std::invalid_argument("solve_sinkhorn: non-finite init");
  }

  const Vec log_a = prob.mu.weights().array().log();
  const Vec log_b = prob.nu.weights().array().log();
  const double inv_lambda = 1.0 / cfg.lambda;

  SolveTrace trace;
  DualPotentials p = init;
  trace.termination = Termination::max_iters;

  for (int t = 0; t <= cfg.max_iters; ++t) {
    const BatchContext* ctx = &frozen;
    std::optional<BatchContext> refreshed;
    if (cfg.refresh_batch && t > 0) {
      refreshed.emplace(make_context(
          prob, frozen.size(),
          SplitMix64::derive(frozen.seed(), static_cast<std::uint64_t>(t)),
          frozen.threads()));
      ctx = &*refreshed;
    }

    const SinkhornIntegrals li = log_sinkhorn_integrals(prob, p, cfg.lambda, *ctx);
    const Estimate obj = dual_objective(prob, p, *ctx);
    DualPotentials next{inv_lambda * (log_a - li.log_i),
                        inv_lambda * (log_b - li.log_j)};
    const double residual = norm_linf_oplus(next, p);

    TraceEntry e;
    e.iter = t;
    e.objective = obj.value;
    e.objective_se = obj.std_error;
    e.grad_or_step_norm = residual;
    trace.entries.push_back(e);
    trace.iterates.push_back(p);
    trace.overflow_flagged = trace.overflow_flagged || !li.reliable || !obj.reliable;

    if (!finite(next)) {
      trace.termination = Termination::nonfinite_iterate;
      break;
    }
    if (cfg.fixed_point_tol > 0.0 && residual <= cfg.fixed_point_tol) {
      trace.termination = Termination::fixed_point_tol;
      break;
    }
    if (t == cfg.max_iters) {
      break;  // final entry recorded; p stays the last applied iterate
    }
    p = next;
  }

  trace.final = p;
  fill_residuals(trace);
  return {p, std::move(trace)};
}

std::pair<DualPotentials, SolveTrace> solve_sinkhorn(const Problem& prob,
                                                     const DualPotentials& init,
                                                     const SinkhornConfig& cfg) {
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("solve_sinkhorn: batch_size must be >= 1");
  }
  return solve_sinkhorn(
      prob, init, cfg, make_context(prob, cfg.batch_size, cfg.seed, cfg.n_threads));
}

}  // namespace tsb
