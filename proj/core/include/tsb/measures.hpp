#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace tsb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Discrete probability measure: support points (one per row) with strictly
// positive weights. Construction renormalizes weight sums that are off by
// less than 1e-9 and rejects anything worse; duplicate support points are
// rejected because the induced max-affine cells would be ambiguous.
class DiscreteMeasure {
 public:
  DiscreteMeasure(Mat points, Vec weights);

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }

 private:
  Mat points_;   // n x d
  Vec weights_;  // n
};

// Correlated Gaussian reference on R^d x R^d built from two independent
// standard normals:
//   X = mean_x + Z0,   Y = mean_y + corr * Z0 + sqrt(1 - corr^2) * Z1,
// i.e. a joint Gaussian with covariance blocks [[I, corr*I], [corr*I, I]].
// |corr| < 1 keeps the density positive and bounded.
class GaussianReference {
 public:
  GaussianReference(Vec mean_x, Vec mean_y, double corr);

  int dim() const { return static_cast<int>(mean_x_.size()); }
  const Vec& mean_x() const { return mean_x_; }
  const Vec& mean_y() const { return mean_y_; }
  double corr() const { return corr_; }

  // Joint density rho(x, y); strictly positive.
  double density(const Eigen::Ref<const Vec>& x,
                 const Eigen::Ref<const Vec>& y) const;
  double log_density(const Eigen::Ref<const Vec>& x,
                     const Eigen::Ref<const Vec>& y) const;
  // exp(-|x|^2/2 - |y|^2/2) * rho(x, y).
  double weighted_density(const Eigen::Ref<const Vec>& x,
                          const Eigen::Ref<const Vec>& y) const;

 private:
  Vec mean_x_, mean_y_;
  double corr_;
  double log_norm_;  // log of the density normalization constant
};

// A frozen Monte Carlo batch drawn from the reference; regeneration with the
// same seed reproduces it bit-exactly.
struct SampleBatch {
  Mat xs;  // N x d
  Mat ys;  // N x d
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(xs.rows()); }
};

SampleBatch sample(const GaussianReference& ref, int n, std::uint64_t seed);

struct BoxBounds {
  double lo = -1.0;
  double hi = 1.0;
};

// Support points uniform on the configured boxes, uniform weights 1/n and
// 1/m. Arbitrary positive weights are supported through the DiscreteMeasure
// constructor directly.
std::pair<DiscreteMeasure, DiscreteMeasure> generate_marginals(
    int n, int m, int dim, std::uint64_t seed, BoxBounds box_x = {-1.0, 1.0},
    BoxBounds box_y = {-2.0, 1.0});

}  // namespace tsb
