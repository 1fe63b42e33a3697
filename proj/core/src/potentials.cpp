#include "tsb/potentials.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsb {

namespace {

void check_shapes(const DualPotentials& p, const DualPotentials& q) {
  if (p.alpha.size() != q.alpha.size() || p.beta.size() != q.beta.size()) {
    throw std::invalid_argument("oplus norm: potential shape mismatch");
  }
}

}  // namespace

double norm_l2_oplus(const DualPotentials& p, const DualPotentials& q) {
  check_shapes(p, q);
  const Vec da = p.alpha - q.alpha;
  const Vec db = p.beta - q.beta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < da.size(); ++i) {
    for (Eigen::Index j = 0; j < db.size(); ++j) {
      const double t = da[i] + db[j];
      s += t * t;
    }
  }
  return std::sqrt(s);
}

double norm_linf_oplus(const DualPotentials& p, const DualPotentials& q) {
  check_shapes(p, q);
  const Vec da = p.alpha - q.alpha;
  const Vec db = p.beta - q.beta;
  const double hi = da.maxCoeff() + db.maxCoeff();
  const double lo = da.minCoeff() + db.minCoeff();
  return std::max(hi, -lo);
}

double max_affine_row(const double* dots, const double* offsets, int n,
                      int* argmax) {
  double best = dots[0] + offsets[0];
  int best_i = 0;
  for (int i = 1; i < n; ++i) {
    const double v = dots[i] + offsets[i];
    if (v > best) {  // strict: ties keep the lowest index
      best = v;
      best_i = i;
    }
  }
  if (argmax != nullptr) {
    *argmax = best_i;
  }
  return best;
}

double log_smooth_row(const double* dots, const double* offsets, int n,
                      double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("log_smooth_potential: lambda must be > 0");
  }
  const double top = max_affine_row(dots, offsets, n, nullptr);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += std::exp(lambda * (dots[i] + offsets[i] - top));
  }
  return top + std::log(s) / lambda;
}

namespace {

Vec support_dots(const Eigen::Ref<const Vec>& x, const Mat& points,
                 const Vec& offsets, const char* who) {
  if (x.size() != points.cols() || offsets.size() != points.rows()) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
  }
  return points * x;
}

}  // namespace

double max_affine(const Eigen::Ref<const Vec>& x, const Mat& points,
                  const Vec& offsets) {
  const Vec dots = support_dots(x, points, offsets, "max_affine");
  return max_affine_row(dots.data(), offsets.data(),
                        static_cast<int>(offsets.size()), nullptr);
}

int cell_index(const Eigen::Ref<const Vec>& x, const Mat& points,
               const Vec& offsets) {
  const Vec dots = support_dots(x, points, offsets, "cell_index");
  int idx = 0;
  max_affine_row(dots.data(), offsets.data(), static_cast<int>(offsets.size()),
                 &idx);
  return idx;
}

double log_smooth_potential(const Eigen::Ref<const Vec>& x, const Mat& points,
                            const Vec& offsets, double lambda) {
  const Vec dots = support_dots(x, points, offsets, "log_smooth_potential");
  return log_smooth_row(dots.data(), offsets.data(),
                        static_cast<int>(offsets.size()), lambda);
}

DualPotentials gauge_fix(const DualPotentials& p) {
  const double r = 0.5 * (p.beta.mean() - p.alpha.mean());
  return {p.alpha.array() + r, p.beta.array() - r};
}

}  // namespace tsb
