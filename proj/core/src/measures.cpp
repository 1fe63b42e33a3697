#include "tsb/measures.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tsb/rng.hpp"

namespace tsb {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
constexpr double kWeightSumTol = 1e-12;
constexpr double kWeightRenormTol = 1e-9;
}  // namespace

DiscreteMeasure::DiscreteMeasure(Mat points, Vec weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  const int n = static_cast<int>(points_.rows());
  if (n < 1 || points_.cols() < 1) {
    throw std::invalid_argument("DiscreteMeasure: empty support");
  }
  if (weights_.size() != n) {
    throw std::invalid_argument("DiscreteMeasure: weight/point count mismatch");
  }
  if (!(weights_.array() > 0.0).all()) {
    throw std::invalid_argument("DiscreteMeasure: weights must be strictly positive");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kWeightRenormTol) {
    throw std::invalid_argument("DiscreteMeasure: weights sum to " +
                                std::to_string(total) + ", expected 1");
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    weights_ /= total;
  }
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      if ((points_.row(i) - points_.row(k)).norm() == 0.0) {
        throw std::invalid_argument("DiscreteMeasure: duplicate support points " +
                                    std::to_string(i) + " and " + std::to_string(k));
      }
    }
  }
}

GaussianReference::GaussianReference(Vec mean_x, Vec mean_y, double corr)
    : mean_x_(std::move(mean_x)), mean_y_(std::move(mean_y)), corr_(corr) {
  if (mean_x_.size() < 1 || mean_x_.size() != mean_y_.size()) {
    throw std::invalid_argument("GaussianReference: mean dimension mismatch");
  }
  if (!(std::abs(corr_) < 1.0)) {
    throw std::invalid_argument("GaussianReference: |corr| must be < 1");
  }
  // Normalizer (2*pi)^{-d} * det^{-1/2}, det = (1 - corr^2)^d.
  const double d = static_cast<double>(mean_x_.size());
  log_norm_ = -d * std::log(kTwoPi) - 0.5 * d * std::log1p(-corr_ * corr_);
}

double GaussianReference::log_density(const Eigen::Ref<const Vec>& x,
                                      const Eigen::Ref<const Vec>& y) const {
  if (x.size() != mean_x_.size() || y.size() != mean_y_.size()) {
    throw std::invalid_argument("GaussianReference::density: dimension mismatch");
  }
  const Vec u = x - mean_x_;
  const Vec v = y - mean_y_;
  // Block inverse of [[I, rI], [rI, I]] is 1/(1-r^2) * [[I, -rI], [-rI, I]].
  const double quad =
      (u.squaredNorm() - 2.0 * corr_ * u.dot(v) + v.squaredNorm()) /
      (1.0 - corr_ * corr_);
  return log_norm_ - 0.5 * quad;
}

double GaussianReference::density(const Eigen::Ref<const Vec>& x,
                                  const Eigen::Ref<const Vec>& y) const {
  return std::exp(log_density(x, y));
}

double GaussianReference::weighted_density(const Eigen::Ref<const Vec>& x,
                                           const Eigen::Ref<const Vec>& y) const {
  return std::exp(log_density(x, y) - 0.5 * x.squaredNorm() - 0.5 * y.squaredNorm());
}

SampleBatch sample(const GaussianReference& ref, int n, std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("sample: batch size must be >= 1");
  }
  const int d = ref.dim();
  const double rho = ref.corr();
  const double comp = std::sqrt(1.0 - rho * rho);
  SampleBatch batch;
  batch.seed = seed;
  batch.xs.resize(n, d);
  batch.ys.resize(n, d);
  SplitMix64 gen(seed);
  for (int k = 0; k < n; ++k) {
    for (int c = 0; c < d; ++c) {
      const double z0 = gen.next_normal();
      const double z1 = gen.next_normal();
      batch.xs(k, c) = ref.mean_x()[c] + z0;
      batch.ys(k, c) = ref.mean_y()[c] + rho * z0 + comp * z1;
    }
  }
  return batch;
}

std::pair<DiscreteMeasure, DiscreteMeasure> generate_marginals(
    int n, int m, int dim, std::uint64_t seed, BoxBounds box_x, BoxBounds box_y) {
  if (n < 1 || m < 1 || dim < 1) {
    throw std::invalid_argument("generate_marginals: sizes must be >= 1");
  }
  SplitMix64 gen(seed);
  Mat px(n, dim), py(m, dim);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) {
      px(i, c) = gen.next_uniform(box_x.lo, box_x.hi);
    }
  }
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < dim; ++c) {
      py(j, c) = gen.next_uniform(box_y.lo, box_y.hi);
    }
  }
  Vec a = Vec::Constant(n, 1.0 / n);
  Vec b = Vec::Constant(m, 1.0 / m);
  return {DiscreteMeasure(std::move(px), std::move(a)),
          DiscreteMeasure(std::move(py), std::move(b))};
}

}  // namespace tsb
