#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "tsb/measures.hpp"
#include "tsb/rng.hpp"

using namespace tsb;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

GaussianReference default_reference() {
  return GaussianReference(v2(1.0, -0.5), v2(-1.0, 0.8), -0.4);
}

// Independent density oracle: build the full 2d x 2d covariance and evaluate
// the multivariate normal through Eigen's LU decomposition, no closed form.
double dense_gaussian_density(const GaussianReference& ref, const Vec& x,
                              const Vec& y) {
  const int d = ref.dim();
  Mat cov = Mat::Identity(2 * d, 2 * d);
  cov.block(0, d, d, d) = ref.corr() * Mat::Identity(d, d);
  cov.block(d, 0, d, d) = ref.corr() * Mat::Identity(d, d);
  Vec z(2 * d);
  z.head(d) = x - ref.mean_x();
  z.tail(d) = y - ref.mean_y();
  Eigen::FullPivLU<Mat> lu(cov);
  const double quad = z.dot(lu.solve(z));
  const double norm =
      std::pow(2.0 * M_PI, -d) / std::sqrt(lu.determinant());
  return norm * std::exp(-0.5 * quad);
}

}  // namespace

TEST_SUITE("measures") {

TEST_CASE("discrete measure invariants") {
  Mat pts(2, 1);
  pts << 0.0, 1.0;
  Vec w(2);
  w << 0.5, 0.5;
  const DiscreteMeasure ok(pts, w);
  CHECK(ok.size() == 2);
  CHECK(ok.dim() == 1);

  SUBCASE("negative weight rejected") {
    Vec bad(2);
    bad << 1.5, -0.5;
    CHECK_THROWS_AS(DiscreteMeasure(pts, bad), std::invalid_argument);
  }
  SUBCASE("tiny imbalance renormalized, larger rejected") {
    Vec near(2);
    near << 0.5 + 2e-10, 0.5;
    const DiscreteMeasure renorm(pts, near);
    CHECK(renorm.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
    Vec off(2);
    off << 0.5 + 1e-6, 0.5;
    CHECK_THROWS_AS(DiscreteMeasure(pts, off), std::invalid_argument);
  }
  SUBCASE("duplicate support rejected") {
    Mat dup(2, 1);
    dup << 0.3, 0.3;
    CHECK_THROWS_AS(DiscreteMeasure(dup, w), std::invalid_argument);
  }
}

TEST_CASE("density at the mean, d=1 standard") {
  const GaussianReference ref(Vec::Zero(1), Vec::Zero(1), 0.0);
  CHECK(ref.density(Vec::Zero(1), Vec::Zero(1)) ==
        doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("density against the dense linear-algebra oracle") {
  const GaussianReference ref = default_reference();
  SUBCASE("at the mean") {
    const double expect = dense_gaussian_density(ref, ref.mean_x(), ref.mean_y());
    // Same value as 1 / ((2 pi)^2 (1 - 0.16)).
    CHECK(expect ==
          doctest::Approx(1.0 / (std::pow(2.0 * M_PI, 2) * 0.84)).epsilon(1e-12));
    CHECK(ref.density(ref.mean_x(), ref.mean_y()) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("random points") {
    SplitMix64 gen(7);
    for (int k = 0; k < 50; ++k) {
      Vec x(2), y(2);
      for (int c = 0; c < 2; ++c) {
        x[c] = 3.0 * gen.next_normal();
        y[c] = 3.0 * gen.next_normal();
      }
      const double expect = dense_gaussian_density(ref, x, y);
      CHECK(ref.density(x, y) == doctest::Approx(expect).epsilon(1e-11));
      CHECK(ref.density(x, y) > 0.0);
    }
  }
}

TEST_CASE("density block symmetry under (x-mx, y-my) swap") {
  const GaussianReference ref = default_reference();
  SplitMix64 gen(11);
  for (int k = 0; k < 20; ++k) {
    Vec u(2), v(2);
    for (int c = 0; c < 2; ++c) {
      u[c] = gen.next_normal();
      v[c] = gen.next_normal();
    }
    const double a = ref.density(ref.mean_x() + u, ref.mean_y() + v);
    const double b = ref.density(ref.mean_x() + v, ref.mean_y() + u);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("weighted density") {
  const GaussianReference std1(Vec::Zero(1), Vec::Zero(1), 0.0);
  SUBCASE("factor is one at the origin") {
    CHECK(std1.weighted_density(Vec::Zero(1), Vec::Zero(1)) ==
          doctest::Approx(std1.density(Vec::Zero(1), Vec::Zero(1))));
  }
  SUBCASE("(1,0) closed form") {
    Vec one = Vec::Ones(1);
    CHECK(std1.weighted_density(one, Vec::Zero(1)) ==
          doctest::Approx(std::exp(-1.0) / (2.0 * M_PI)).epsilon(1e-14));
  }
  SUBCASE("never exceeds the plain density and stays positive") {
    const GaussianReference ref = default_reference();
    SplitMix64 gen(13);
    for (int k = 0; k < 50; ++k) {
      Vec x(2), y(2);
      for (int c = 0; c < 2; ++c) {
        x[c] = 2.0 * gen.next_normal();
        y[c] = 2.0 * gen.next_normal();
      }
      CHECK(ref.weighted_density(x, y) <= ref.density(x, y));
      CHECK(ref.weighted_density(x, y) > 0.0);
    }
  }
}

TEST_CASE("density dimension mismatch is a contract violation") {
  const GaussianReference ref = default_reference();
  CHECK_THROWS_AS(ref.density(Vec::Zero(3), Vec::Zero(2)), std::invalid_argument);
  CHECK_THROWS_AS(GaussianReference(Vec::Zero(2), Vec::Zero(2), 1.0),
                  std::invalid_argument);
}

TEST_CASE("sampling determinism and moments") {
  const GaussianReference ref = default_reference();
  const int N = 100000;
  const SampleBatch batch = sample(ref, N, 42);

  SUBCASE("same seed reproduces bit-exactly") {
    const SampleBatch again = sample(ref, N, 42);
    CHECK(batch.xs == again.xs);
    CHECK(batch.ys == again.ys);
    const SampleBatch other = sample(ref, N, 43);
    CHECK(batch.xs != other.xs);
  }
  SUBCASE("component means within 4/sqrt(N)") {
    const double tol = 4.0 / std::sqrt(static_cast<double>(N));
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(batch.xs.col(c).mean() - ref.mean_x()[c]) < tol);
      CHECK(std::abs(batch.ys.col(c).mean() - ref.mean_y()[c]) < tol);
    }
  }
  SUBCASE("corr=0 gives empirical cross-correlation near zero") {
    const GaussianReference indep(Vec::Zero(1), Vec::Zero(1), 0.0);
    const SampleBatch b = sample(indep, N, 5);
    const double c =
        ((b.xs.col(0).array() - b.xs.col(0).mean()) *
         (b.ys.col(0).array() - b.ys.col(0).mean()))
            .mean();
    CHECK(std::abs(c) < 4.0 / std::sqrt(static_cast<double>(N)));
  }
  SUBCASE("empirical correlation matches corr = -0.4") {
    const double cx =
        ((batch.xs.col(0).array() - batch.xs.col(0).mean()) *
         (batch.ys.col(0).array() - batch.ys.col(0).mean()))
            .mean();
    CHECK(cx == doctest::Approx(-0.4).epsilon(0.05));
  }
}

TEST_CASE("generate_marginals") {
  SUBCASE("single point gets weight one") {
    auto [mu, nu] = generate_marginals(1, 1, 2, 9);
    CHECK(mu.weights()[0] == doctest::Approx(1.0));
    CHECK(nu.weights()[0] == doctest::Approx(1.0));
  }
  SUBCASE("default boxes and uniform weights") {
    auto [mu, nu] = generate_marginals(10, 10, 2, 123);
    CHECK((mu.points().array() >= -1.0).all());
    CHECK((mu.points().array() <= 1.0).all());
    CHECK((nu.points().array() >= -2.0).all());
    CHECK((nu.points().array() <= 1.0).all());
    CHECK((mu.weights().array() == 0.1).all());
    CHECK((nu.weights().array() == 0.1).all());
  }
  SUBCASE("same seed twice gives identical measures") {
    auto [a1, b1] = generate_marginals(5, 7, 2, 77);
    auto [a2, b2] = generate_marginals(5, 7, 2, 77);
    CHECK(a1.points() == a2.points());
    CHECK(b1.points() == b2.points());
  }
}

TEST_CASE("monte carlo expectations under sample()") {
  const GaussianReference ref = default_reference();
  const int N = 20000;
  const SampleBatch batch = sample(ref, N, 2024);
  SUBCASE("constant test function integrates exactly") {
    double s = 0.0;
    for (int k = 0; k < N; ++k) s += 1.0;
    CHECK(s / N == 1.0);
  }
  SUBCASE("coordinate means within 5 standard errors") {
    for (int c = 0; c < 2; ++c) {
      const double mean = batch.xs.col(c).mean();
      const double sd = std::sqrt(
          (batch.xs.col(c).array() - mean).square().sum() / (N - 1));
      CHECK(std::abs(mean - ref.mean_x()[c]) <
            5.0 * sd / std::sqrt(static_cast<double>(N)));
    }
  }
}

TEST_CASE("density integrates to one (d=1 trapezoid)") {
  const GaussianReference ref(Vec::Constant(1, 0.2), Vec::Constant(1, -0.3), 0.5);
  // Integrate rho over a wide grid in (x, y).
  const double lo = -9.0, hi = 9.0;
  const int n = 900;
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double wx = (i == 0 || i == n) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
      total += wx * wy *
               ref.density(Vec::Constant(1, lo + i * h), Vec::Constant(1, lo + j * h));
    }
  }
  total *= h * h;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("self-sampling density ratio is exactly one") {
  // MC estimate of E_gamma[rho / rho] is identically one sample by sample.
  const GaussianReference ref = default_reference();
  const SampleBatch b = sample(ref, 100, 3);
  for (int k = 0; k < b.size(); ++k) {
    const double d = ref.density(b.xs.row(k).transpose(), b.ys.row(k).transpose());
    CHECK(d / d == 1.0);
  }
}

}  // TEST_SUITE
