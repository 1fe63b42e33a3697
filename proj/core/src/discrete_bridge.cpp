#include "tsb/discrete_bridge.hpp"

#include <cmath>
#include <string>

namespace tsb {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

double logsumexp(const Vec& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

Mat coupling_from(const Mat& log_sigma, const Vec& p, const Vec& q) {
  Mat pi(log_sigma.rows(), log_sigma.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      pi(i, j) = std::exp(log_sigma(i, j) + p[i] + q[j]);
    }
  }
  return pi;
}

double marginal_violation(const Mat& pi, const Vec& a, const Vec& b) {
  const double va = (pi.rowwise().sum() - a).cwiseAbs().maxCoeff();
  const double vb = (pi.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
  return std::max(va, vb);
}

}  // namespace

DiscreteBridgeProblem::DiscreteBridgeProblem(Mat sigma_, Vec a_, Vec b_)
    : sigma(std::move(sigma_)), a(std::move(a_)), b(std::move(b_)) {
  if (sigma.rows() != a.size() || sigma.cols() != b.size()) {
    throw std::invalid_argument("DiscreteBridgeProblem: shape mismatch");
  }
  if (!(sigma.array() > 0.0).all()) {
    throw std::invalid_argument("DiscreteBridgeProblem: sigma must be strictly positive");
  }
  if (!(a.array() > 0.0).all() || !(b.array() > 0.0).all()) {
    throw std::invalid_argument("DiscreteBridgeProblem: weights must be positive");
  }
  if (std::abs(a.sum() - 1.0) > 1e-9 || std::abs(b.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("DiscreteBridgeProblem: weights must sum to one");
  }
}

Mat build_limit_sigma(const Problem& prob) {
  const int n = prob.n();
  const int m = prob.m();
  const double scale = std::pow(kTwoPi, prob.dim());
  Mat sigma(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      sigma(i, j) =
          scale * prob.ref.density(prob.mu.points().row(i).transpose(),
                                   prob.nu.points().row(j).transpose());
    }
  }
  return sigma;
}

DiscreteBridgeSolution solve_discrete_sinkhorn(const DiscreteBridgeProblem& dbp,
                                               double tol, int max_iters) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("solve_discrete_sinkhorn: tol must be > 0");
  }
  const int n = static_cast<int>(dbp.a.size());
  const int m = static_cast<int>(dbp.b.size());
  const Mat log_sigma = dbp.sigma.array().log();
  const Vec log_a = dbp.a.array().log();
  const Vec log_b = dbp.b.array().log();

  Vec p = Vec::Zero(n);
  Vec q = Vec::Zero(m);
  double violation = 0.0;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    for (int i = 0; i < n; ++i) {
      p[i] = log_a[i] - logsumexp(log_sigma.row(i).transpose() + q);
    }
    for (int j = 0; j < m; ++j) {
      q[j] = log_b[j] - logsumexp(log_sigma.col(j) + p);
    }
    violation = marginal_violation(coupling_from(log_sigma, p, q), dbp.a, dbp.b);
    if (violation < tol) {
      break;
    }
  }
  if (violation >= tol) {
    throw ConvergenceError(
        "solve_discrete_sinkhorn: no convergence after " +
            std::to_string(max_iters) + " iterations, last violation " +
            std::to_string(violation),
        violation);
  }

  // Gauge: shift so mean(p) == mean(q); coupling and entropy are unchanged.
  const double shift = 0.5 * (q.mean() - p.mean());
  p.array() += shift;
  q.array() -= shift;

  DiscreteBridgeSolution sol;
  sol.coupling = coupling_from(log_sigma, p, q);
  sol.p = std::move(p);
  sol.q = std::move(q);
  sol.entropy = dbp.a.dot(sol.p) + dbp.b.dot(sol.q);
  sol.iterations = iter + 1;
  sol.marginal_violation = violation;
  return sol;
}

BlowupReference blowup_reference_values(const Problem& prob) {
  BlowupReference ref;
  ref.sigma = build_limit_sigma(prob);
  ref.bridge = solve_discrete_sinkhorn(
      DiscreteBridgeProblem(ref.sigma, prob.mu.weights(), prob.nu.weights()));
  return ref;
}

}  // namespace tsb
