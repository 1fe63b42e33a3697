#include "tsb/estimators.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace tsb {

namespace {

constexpr int kChunk = 4096;

// Runs `make(begin, end)` over fixed-size chunks (optionally on a thread
// pool) and merges the partials pairwise in chunk-index order. The chunk
// size and merge order never depend on the thread count, so parallel and
// serial runs produce bit-identical results.
template <class Partial, class ChunkFn, class MergeFn>
Partial chunked_reduce(int n_items, int n_threads, ChunkFn make, MergeFn merge) {
  const int n_chunks = (n_items + kChunk - 1) / kChunk;
  std::vector<Partial> parts(static_cast<std::size_t>(n_chunks));
  auto run_chunk = [&](int c) {
    const int begin = c * kChunk;
    const int end = std::min(n_items, begin + kChunk);
    parts[static_cast<std::size_t>(c)] = make(begin, end);
  };
  if (n_threads <= 1 || n_chunks <= 1) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int c; (c = next.fetch_add(1)) < n_chunks;) run_chunk(c);
    };
    std::vector<std::thread> pool;
    const int workers = std::min(n_threads, n_chunks);
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int width = 1; width < n_chunks; width *= 2) {
    for (int i = 0; i + width < n_chunks; i += 2 * width) {
      merge(parts[static_cast<std::size_t>(i)],
            parts[static_cast<std::size_t>(i + width)]);
    }
  }
  return parts[0];
}

double sample_std_error(double sum, double sum_sq, int n) {
  if (n < 2) return 0.0;
  const double mean = sum / n;
  double var = (sum_sq - static_cast<double>(n) * mean * mean) / (n - 1);
  if (var < 0.0) var = 0.0;  // cancellation guard
  return std::sqrt(var / n);
}

void check_pots(const Problem& prob, const DualPotentials& pots) {
  if (pots.alpha.size() != prob.n() || pots.beta.size() != prob.m()) {
    throw std::invalid_argument("estimator: potential shape mismatch with problem");
  }
}

}  // namespace

Problem::Problem(DiscreteMeasure mu_, DiscreteMeasure nu_, GaussianReference ref_)
    : mu(std::move(mu_)), nu(std::move(nu_)), ref(std::move(ref_)) {
  if (mu.dim() != nu.dim() || mu.dim() != ref.dim()) {
    throw std::invalid_argument("Problem: dimension mismatch between marginals and reference");
  }
}

BatchContext::BatchContext(const Problem& prob, SampleBatch batch, int n_threads)
    : batch_(std::move(batch)), n_threads_(std::max(1, n_threads)) {
  if (batch_.xs.rows() != batch_.ys.rows()) {
    throw std::invalid_argument("BatchContext: xs/ys batch size mismatch");
  }
  if (batch_.xs.cols() != prob.dim() || batch_.ys.cols() != prob.dim()) {
    throw std::invalid_argument("BatchContext: batch dimension mismatch");
  }
  dot_x_ = batch_.xs * prob.mu.points().transpose();
  dot_y_ = batch_.ys * prob.nu.points().transpose();
  half_sq_x_ = 0.5 * batch_.xs.rowwise().squaredNorm();
  half_sq_y_ = 0.5 * batch_.ys.rowwise().squaredNorm();
  support_sq_x_ = prob.mu.points().rowwise().squaredNorm();
  support_sq_y_ = prob.nu.points().rowwise().squaredNorm();
}

namespace {

struct DualPartial {
  double sw = 0.0;
  double sw2 = 0.0;
  Vec mass_a;
  Vec mass_b;
  bool capped = false;
};

DualPartial accumulate_dual(const DualPotentials& pots, double inv_eps,
                            const BatchContext& ctx, int begin, int end) {
  const int n = static_cast<int>(pots.alpha.size());
  const int m = static_cast<int>(pots.beta.size());
  DualPartial p;
  p.mass_a = Vec::Zero(n);
  p.mass_b = Vec::Zero(m);
  const double* alpha = pots.alpha.data();
  const double* beta = pots.beta.data();
  for (int k = begin; k < end; ++k) {
    int ia = 0, jb = 0;
    const double fx = max_affine_row(ctx.dot_x().row(k).data(), alpha, n, &ia);
    const double gy = max_affine_row(ctx.dot_y().row(k).data(), beta, m, &jb);
    double e = inv_eps * (fx + gy - ctx.half_sq_x()[k] - ctx.half_sq_y()[k]);
    if (e > kExponentCap) {
      e = kExponentCap;
      p.capped = true;
    }
    const double w = std::exp(e);
    p.sw += w;
    p.sw2 += w * w;
    p.mass_a[ia] += w;
    p.mass_b[jb] += w;
  }
  return p;
}

}  // namespace

DualEvaluation evaluate_dual(const Problem& prob, const DualPotentials& pots,
                             double eps, const BatchContext& ctx) {
  check_pots(prob, pots);
  if (!(eps > 0.0)) {
    throw std::invalid_argument("evaluate_dual: eps must be > 0");
  }
  const double inv_eps = 1.0 / eps;
  const int N = ctx.size();
  DualPartial total = chunked_reduce<DualPartial>(
      N, ctx.threads(),
      [&](int b, int e) { return accumulate_dual(pots, inv_eps, ctx, b, e); },
      [](DualPartial& a, const DualPartial& b) {
        a.sw += b.sw;
        a.sw2 += b.sw2;
        a.mass_a += b.mass_a;
        a.mass_b += b.mass_b;
        a.capped = a.capped || b.capped;
      });

  const Vec& a = prob.mu.weights();
  const Vec& b = prob.nu.weights();
  const double linear =
      inv_eps * (a.dot(pots.alpha + 0.5 * ctx.support_sq_x()) +
                 b.dot(pots.beta + 0.5 * ctx.support_sq_y()));

  DualEvaluation out;
  out.objective.value = linear - total.sw / N + 1.0;
  out.objective.std_error = sample_std_error(total.sw, total.sw2, N);
  out.objective.batch_size = N;
  out.objective.seed = ctx.seed();
  out.objective.reliable = !total.capped;
  out.gradient.d_alpha = inv_eps * (a - total.mass_a / N);
  out.gradient.d_beta = inv_eps * (b - total.mass_b / N);
  out.gradient.reliable = !total.capped;
  return out;
}

Estimate dual_objective(const Problem& prob, const DualPotentials& pots,
                        const BatchContext& ctx) {
  return evaluate_dual(prob, pots, 1.0, ctx).objective;
}

Estimate dual_objective_eps(const Problem& prob, const DualPotentials& pots,
                            double eps, const BatchContext& ctx) {
  return evaluate_dual(prob, pots, eps, ctx).objective;
}

DualGradient dual_gradient(const Problem& prob, const DualPotentials& pots,
                           const BatchContext& ctx) {
  return evaluate_dual(prob, pots, 1.0, ctx).gradient;
}

DualGradient dual_gradient_eps(const Problem& prob, const DualPotentials& pots,
                               double eps, const BatchContext& ctx) {
  return evaluate_dual(prob, pots, eps, ctx).gradient;
}

namespace {

// Streaming log-sum-exp accumulators, one per output component.
struct LsePartial {
  Vec max_i, sum_i;
  Vec max_j, sum_j;
  bool finite = true;
};

void lse_push(double e, double& mx, double& sum) {
  if (e <= mx) {
    sum += std::exp(e - mx);
  } else {
    sum = sum * std::exp(mx - e) + 1.0;
    mx = e;
  }
}

void lse_merge(double& mx, double& sum, double mx2, double sum2) {
  if (sum2 == 0.0) return;
  if (sum == 0.0) {
    mx = mx2;
    sum = sum2;
    return;
  }
  if (mx2 <= mx) {
    sum += sum2 * std::exp(mx2 - mx);
  } else {
    sum = sum * std::exp(mx - mx2) + sum2;
    mx = mx2;
  }
}

LsePartial accumulate_lse(const DualPotentials& pots, double lambda,
                          const BatchContext& ctx, int begin, int end) {
  const int n = static_cast<int>(pots.alpha.size());
  const int m = static_cast<int>(pots.beta.size());
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  LsePartial p;
  p.max_i = Vec::Constant(n, neg_inf);
  p.sum_i = Vec::Zero(n);
  p.max_j = Vec::Constant(m, neg_inf);
  p.sum_j = Vec::Zero(m);
  const double* alpha = pots.alpha.data();
  const double* beta = pots.beta.data();
  for (int k = begin; k < end; ++k) {
    const double* dx = ctx.dot_x().row(k).data();
    const double* dy = ctx.dot_y().row(k).data();
    const double lphi = log_smooth_row(dx, alpha, n, lambda);
    const double lpsi = log_smooth_row(dy, beta, m, lambda);
    const double damp = -ctx.half_sq_x()[k] - ctx.half_sq_y()[k];
    const double base_x = (1.0 - lambda) * lphi + lpsi + damp;
    const double base_y = lphi + (1.0 - lambda) * lpsi + damp;
    if (!std::isfinite(base_x) || !std::isfinite(base_y)) {
      p.finite = false;
      continue;
    }
    for (int i = 0; i < n; ++i) {
      lse_push(base_x + lambda * dx[i], p.max_i[i], p.sum_i[i]);
    }
    for (int j = 0; j < m; ++j) {
      lse_push(base_y + lambda * dy[j], p.max_j[j], p.sum_j[j]);
    }
  }
  return p;
}

}  // namespace

SinkhornIntegrals log_sinkhorn_integrals(const Problem& prob,
                                         const DualPotentials& pots,
                                         double lambda,
                                         const BatchContext& ctx) {
  check_pots(prob, pots);
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("log_sinkhorn_integrals: lambda must be > 0");
  }
  const int N = ctx.size();
  LsePartial total = chunked_reduce<LsePartial>(
      N, ctx.threads(),
      [&](int b, int e) { return accumulate_lse(pots, lambda, ctx, b, e); },
      [](LsePartial& a, const LsePartial& b) {
        for (Eigen::Index i = 0; i < a.max_i.size(); ++i) {
          lse_merge(a.max_i[i], a.sum_i[i], b.max_i[i], b.sum_i[i]);
        }
        for (Eigen::Index j = 0; j < a.max_j.size(); ++j) {
          lse_merge(a.max_j[j], a.sum_j[j], b.max_j[j], b.sum_j[j]);
        }
        a.finite = a.finite && b.finite;
      });
  const double log_n = std::log(static_cast<double>(N));
  SinkhornIntegrals out;
  out.log_i = total.max_i + total.sum_i.array().log().matrix() -
              Vec::Constant(total.max_i.size(), log_n);
  out.log_j = total.max_j + total.sum_j.array().log().matrix() -
              Vec::Constant(total.max_j.size(), log_n);
  out.reliable = total.finite && out.log_i.allFinite() && out.log_j.allFinite();
  return out;
}

std::pair<Vec, Vec> sinkhorn_integrals(const Problem& prob,
                                       const DualPotentials& pots,
                                       double lambda, const BatchContext& ctx) {
  const SinkhornIntegrals li = log_sinkhorn_integrals(prob, pots, lambda, ctx);
  return {li.log_i.array().exp(), li.log_j.array().exp()};
}

namespace {

struct MassPartial {
  Mat mass;
  Mat mass2;
  double sw = 0.0;
  double sw2 = 0.0;
  bool capped = false;
};

MassPartial accumulate_mass(const DualPotentials& pots, double inv_eps,
                            const BatchContext& ctx, int begin, int end) {
  const int n = static_cast<int>(pots.alpha.size());
  const int m = static_cast<int>(pots.beta.size());
  MassPartial p;
  p.mass = Mat::Zero(n, m);
  p.mass2 = Mat::Zero(n, m);
  const double* alpha = pots.alpha.data();
  const double* beta = pots.beta.data();
  for (int k = begin; k < end; ++k) {
    int ia = 0, jb = 0;
    const double fx = max_affine_row(ctx.dot_x().row(k).data(), alpha, n, &ia);
    const double gy = max_affine_row(ctx.dot_y().row(k).data(), beta, m, &jb);
    double e = inv_eps * (fx + gy - ctx.half_sq_x()[k] - ctx.half_sq_y()[k]);
    if (e > kExponentCap) {
      e = kExponentCap;
      p.capped = true;
    }
    const double w = std::exp(e);
    p.mass(ia, jb) += w;
    p.mass2(ia, jb) += w * w;
    p.sw += w;
    p.sw2 += w * w;
  }
  return p;
}

}  // namespace

CellMassMatrix cell_mass_matrix(const Problem& prob, const DualPotentials& pots,
                                double eps, const BatchContext& ctx) {
  check_pots(prob, pots);
  if (!(eps > 0.0)) {
    throw std::invalid_argument("cell_mass_matrix: eps must be > 0");
  }
  const double inv_eps = 1.0 / eps;
  const int N = ctx.size();
  MassPartial total = chunked_reduce<MassPartial>(
      N, ctx.threads(),
      [&](int b, int e) { return accumulate_mass(pots, inv_eps, ctx, b, e); },
      [](MassPartial& a, const MassPartial& b) {
        a.mass += b.mass;
        a.mass2 += b.mass2;
        a.sw += b.sw;
        a.sw2 += b.sw2;
        a.capped = a.capped || b.capped;
      });
  CellMassMatrix out;
  out.masses = total.mass / N;
  out.std_errors.resize(total.mass.rows(), total.mass.cols());
  for (Eigen::Index i = 0; i < total.mass.rows(); ++i) {
    for (Eigen::Index j = 0; j < total.mass.cols(); ++j) {
      out.std_errors(i, j) = sample_std_error(total.mass(i, j), total.mass2(i, j), N);
    }
  }
  // The cell indicators are disjoint, so (w * 1_row)^2 sums the per-entry
  // squares and the row/column variances come from the same accumulators.
  out.row_std_errors.resize(total.mass.rows());
  for (Eigen::Index i = 0; i < total.mass.rows(); ++i) {
    out.row_std_errors[i] =
        sample_std_error(total.mass.row(i).sum(), total.mass2.row(i).sum(), N);
  }
  out.col_std_errors.resize(total.mass.cols());
  for (Eigen::Index j = 0; j < total.mass.cols(); ++j) {
    out.col_std_errors[j] =
        sample_std_error(total.mass.col(j).sum(), total.mass2.col(j).sum(), N);
  }
  out.total = total.sw / N;
  out.ess = total.sw2 > 0.0 ? total.sw * total.sw / total.sw2 : 0.0;
  out.reliable = !total.capped;
  return out;
}

double primal_value_from_duals(const Problem& prob, const DualPotentials& pots,
                               double eps) {
  check_pots(prob, pots);
  if (!(eps > 0.0)) {
    throw std::invalid_argument("primal_value_from_duals: eps must be > 0");
  }
  const Vec sq_x = prob.mu.points().rowwise().squaredNorm();
  const Vec sq_y = prob.nu.points().rowwise().squaredNorm();
  return (prob.mu.weights().dot(pots.alpha + 0.5 * sq_x) +
          prob.nu.weights().dot(pots.beta + 0.5 * sq_y)) /
         eps;
}

namespace {

// Accumulators for the self-normalized ratio estimators: for each quantity c
// we track sum(w*c), sum(w^2*c) and sum(w^2*c^2) so the linearized variance
// of sum(w*c)/sum(w) can be assembled afterwards.
struct CostPartial {
  double sw = 0.0, sw2 = 0.0;
  double swc_x = 0.0, sw2c_x = 0.0, sw2c2_x = 0.0;
  double swc_y = 0.0, sw2c_y = 0.0, sw2c2_y = 0.0;
  double swe = 0.0, sw2e = 0.0, sw2e2 = 0.0;
  bool capped = false;
};

CostPartial accumulate_cost(const DualPotentials& pots, double inv_eps,
                            const BatchContext& ctx, int begin, int end) {
  const int n = static_cast<int>(pots.alpha.size());
  const int m = static_cast<int>(pots.beta.size());
  CostPartial p;
  const double* alpha = pots.alpha.data();
  const double* beta = pots.beta.data();
  for (int k = begin; k < end; ++k) {
    int ia = 0, jb = 0;
    const double* dx = ctx.dot_x().row(k).data();
    const double* dy = ctx.dot_y().row(k).data();
    const double fx = max_affine_row(dx, alpha, n, &ia);
    const double gy = max_affine_row(dy, beta, m, &jb);
    double e = inv_eps * (fx + gy - ctx.half_sq_x()[k] - ctx.half_sq_y()[k]);
    if (e > kExponentCap) {
      e = kExponentCap;
      p.capped = true;
    }
    const double w = std::exp(e);
    // |x_k - x_i|^2 = |x_k|^2 - 2 <x_k, x_i> + |x_i|^2
    const double cx =
        0.5 * (2.0 * ctx.half_sq_x()[k] - 2.0 * dx[ia] + ctx.support_sq_x()[ia]);
    const double cy =
        0.5 * (2.0 * ctx.half_sq_y()[k] - 2.0 * dy[jb] + ctx.support_sq_y()[jb]);
    const double w2 = w * w;
    p.sw += w;
    p.sw2 += w2;
    p.swc_x += w * cx;
    p.sw2c_x += w2 * cx;
    p.sw2c2_x += w2 * cx * cx;
    p.swc_y += w * cy;
    p.sw2c_y += w2 * cy;
    p.sw2c2_y += w2 * cy * cy;
    p.swe += w * e;
    p.sw2e += w2 * e;
    p.sw2e2 += w2 * e * e;
  }
  return p;
}

Estimate ratio_estimate(double sw, double swc, double sw2c, double sw2c2,
                        double sw2, int batch_size, std::uint64_t seed,
                        bool reliable) {
  Estimate est;
  est.batch_size = batch_size;
  est.seed = seed;
  est.reliable = reliable;
  if (sw <= 0.0) {
    est.value = 0.0;
    est.std_error = 0.0;
    est.reliable = false;
    return est;
  }
  const double r = swc / sw;
  double var = sw2c2 - 2.0 * r * sw2c + r * r * sw2;
  if (var < 0.0) var = 0.0;
  est.value = r;
  est.std_error = std::sqrt(var) / sw;
  return est;
}

}  // namespace

TransportCost marginal_transport_cost(const Problem& prob,
                                      const DualPotentials& pots, double eps,
                                      const BatchContext& ctx) {
  check_pots(prob, pots);
  if (!(eps > 0.0)) {
    throw std::invalid_argument("marginal_transport_cost: eps must be > 0");
  }
  const double inv_eps = 1.0 / eps;
  const int N = ctx.size();
  CostPartial t = chunked_reduce<CostPartial>(
      N, ctx.threads(),
      [&](int b, int e) { return accumulate_cost(pots, inv_eps, ctx, b, e); },
      [](CostPartial& a, const CostPartial& b) {
        a.sw += b.sw;
        a.sw2 += b.sw2;
        a.swc_x += b.swc_x;
        a.sw2c_x += b.sw2c_x;
        a.sw2c2_x += b.sw2c2_x;
        a.swc_y += b.swc_y;
        a.sw2c_y += b.sw2c_y;
        a.sw2c2_y += b.sw2c2_y;
        a.swe += b.swe;
        a.sw2e += b.sw2e;
        a.sw2e2 += b.sw2e2;
        a.capped = a.capped || b.capped;
      });
  TransportCost out;
  out.ess = t.sw2 > 0.0 ? t.sw * t.sw / t.sw2 : 0.0;
  out.reliable = !t.capped && out.ess >= kMinEffectiveSamples;
  out.cost_x = ratio_estimate(t.sw, t.swc_x, t.sw2c_x, t.sw2c2_x, t.sw2, N,
                              ctx.seed(), out.reliable);
  out.cost_y = ratio_estimate(t.sw, t.swc_y, t.sw2c_y, t.sw2c2_y, t.sw2, N,
                              ctx.seed(), out.reliable);
  out.entropy = ratio_estimate(t.sw, t.swe, t.sw2e, t.sw2e2, t.sw2, N,
                               ctx.seed(), out.reliable);
  return out;
}

}  // namespace tsb
