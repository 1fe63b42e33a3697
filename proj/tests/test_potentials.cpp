#include <doctest.h>

#include <cmath>

#include "tsb/potentials.hpp"
#include "tsb/rng.hpp"

using namespace tsb;

namespace {

DualPotentials random_pots(int n, int m, SplitMix64& gen, double scale = 1.0) {
  DualPotentials p{Vec(n), Vec(m)};
  for (int i = 0; i < n; ++i) p.alpha[i] = scale * gen.next_normal();
  for (int j = 0; j < m; ++j) p.beta[j] = scale * gen.next_normal();
  return p;
}

// Brute-force oracle: assemble the full n x m matrix of sums.
double linf_matrix_oracle(const DualPotentials& p, const DualPotentials& q) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < p.alpha.size(); ++i) {
    for (Eigen::Index j = 0; j < p.beta.size(); ++j) {
      best = std::max(best, std::abs((p.alpha[i] - q.alpha[i]) +
                                     (p.beta[j] - q.beta[j])));
    }
  }
  return best;
}

DualPotentials shifted(const DualPotentials& p, double r) {
  return {p.alpha.array() + r, p.beta.array() - r};
}

}  // namespace

TEST_SUITE("potentials") {

TEST_CASE("oplus norms vanish exactly on the shift class") {
  SplitMix64 gen(1);
  const DualPotentials p = random_pots(4, 3, gen);
  const DualPotentials q = shifted(p, 3.7);
  CHECK(norm_l2_oplus(p, q) == 0.0);
  CHECK(norm_linf_oplus(p, q) == 0.0);
}

TEST_CASE("oplus norms on hand examples") {
  DualPotentials p{Vec(2), Vec(2)}, q{Vec(2), Vec(2)};
  p.alpha << 1.0, 0.0;
  p.beta << 0.0, -1.0;
  q.alpha.setZero();
  q.beta.setZero();
  // matrix of sums: [[1, 0], [0, -1]]
  CHECK(norm_l2_oplus(p, q) == doctest::Approx(std::sqrt(2.0)));
  CHECK(norm_linf_oplus(p, q) == doctest::Approx(1.0));

  DualPotentials a{Vec(1), Vec(1)}, b{Vec(1), Vec(1)};
  a.alpha << -2.5;
  a.beta << 0.0;
  b.alpha.setZero();
  b.beta.setZero();
  CHECK(norm_l2_oplus(a, b) == doctest::Approx(2.5));
}

TEST_CASE("linf max/min formula agrees with the matrix oracle") {
  SplitMix64 gen(2);
  for (int t = 0; t < 1000; ++t) {
    const DualPotentials p = random_pots(5, 4, gen, 2.0);
    const DualPotentials q = random_pots(5, 4, gen, 2.0);
    CHECK(norm_linf_oplus(p, q) ==
          doctest::Approx(linf_matrix_oracle(p, q)).epsilon(1e-14));
  }
}

TEST_CASE("oplus norms are pseudometrics") {
  SplitMix64 gen(3);
  for (int t = 0; t < 200; ++t) {
    const DualPotentials a = random_pots(4, 4, gen);
    const DualPotentials b = random_pots(4, 4, gen);
    const DualPotentials c = random_pots(4, 4, gen);
    CHECK(norm_l2_oplus(a, b) >= 0.0);
    CHECK(norm_l2_oplus(a, b) == doctest::Approx(norm_l2_oplus(b, a)));
    CHECK(norm_l2_oplus(a, c) <=
          norm_l2_oplus(a, b) + norm_l2_oplus(b, c) + 1e-12);
    CHECK(norm_linf_oplus(a, c) <=
          norm_linf_oplus(a, b) + norm_linf_oplus(b, c) + 1e-12);
  }
}

TEST_CASE("norm equivalence bounds") {
  SplitMix64 gen(4);
  const int n = 6, m = 5;
  for (int t = 0; t < 200; ++t) {
    const DualPotentials p = random_pots(n, m, gen);
    const DualPotentials q = random_pots(n, m, gen);
    const double l2 = norm_l2_oplus(p, q);
    const double linf = norm_linf_oplus(p, q);
    CHECK(linf <= l2 + 1e-12);
    CHECK(l2 <= std::sqrt(static_cast<double>(n * m)) * linf + 1e-12);
  }
}

TEST_CASE("max_affine basics") {
  SUBCASE("single piece is exact") {
    Mat pts(1, 2);
    pts << 0.7, -0.2;
    Vec off(1);
    off << 1.5;
    Vec x(2);
    x << 2.0, 1.0;
    CHECK(max_affine(x, pts, off) == doctest::Approx(0.7 * 2.0 - 0.2 + 1.5));
  }
  SUBCASE("two symmetric points") {
    Mat pts(2, 2);
    pts << 1.0, 0.0, -1.0, 0.0;
    const Vec off = Vec::Zero(2);
    Vec x(2);
    x << 0.5, 0.0;
    CHECK(max_affine(x, pts, off) == doctest::Approx(0.5));
    CHECK(cell_index(x, pts, off) == 0);
  }
  SUBCASE("translation equivariance in the offsets") {
    SplitMix64 gen(5);
    Mat pts(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c) pts(i, c) = gen.next_normal();
    Vec off(4);
    for (int i = 0; i < 4; ++i) off[i] = gen.next_normal();
    for (int t = 0; t < 50; ++t) {
      Vec x(3);
      for (int c = 0; c < 3; ++c) x[c] = gen.next_normal();
      CHECK(max_affine(x, pts, Vec(off.array() + 2.25)) ==
            doctest::Approx(max_affine(x, pts, off) + 2.25));
    }
  }
  SUBCASE("convex in x (midpoint test)") {
    SplitMix64 gen(6);
    Mat pts(5, 2);
    for (int i = 0; i < 5; ++i)
      for (int c = 0; c < 2; ++c) pts(i, c) = gen.next_normal();
    Vec off(5);
    for (int i = 0; i < 5; ++i) off[i] = gen.next_normal();
    for (int t = 0; t < 100; ++t) {
      Vec x(2), y(2);
      for (int c = 0; c < 2; ++c) {
        x[c] = 2.0 * gen.next_normal();
        y[c] = 2.0 * gen.next_normal();
      }
      const Vec mid = 0.5 * (x + y);
      CHECK(max_affine(mid, pts, off) <=
            0.5 * (max_affine(x, pts, off) + max_affine(y, pts, off)) + 1e-12);
    }
  }
}

TEST_CASE("cell_index ties break to the lowest index") {
  Mat pts(2, 2);
  pts << 1.0, 0.0, -1.0, 0.0;
  const Vec off = Vec::Zero(2);
  Vec origin = Vec::Zero(2);  // exact tie between both pieces
  CHECK(cell_index(origin, pts, off) == 0);
}

TEST_CASE("cell_index attains the max on random configurations") {
  SplitMix64 gen(7);
  Mat pts(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 2; ++c) pts(i, c) = gen.next_normal();
  Vec off(6);
  for (int i = 0; i < 6; ++i) off[i] = 0.3 * gen.next_normal();
  for (int t = 0; t < 200; ++t) {
    Vec x(2);
    for (int c = 0; c < 2; ++c) x[c] = 3.0 * gen.next_normal();
    const int idx = cell_index(x, pts, off);
    CHECK(max_affine(x, pts, off) ==
          doctest::Approx(pts.row(idx).dot(x) + off[idx]));
  }
}

TEST_CASE("log smooth potential") {
  SUBCASE("single term collapses for every lambda") {
    Mat pts(1, 1);
    pts << 0.4;
    Vec off(1);
    off << -0.3;
    Vec x(1);
    x << 2.0;
    for (double lambda : {0.5, 2.0, 10.0, 1e4}) {
      CHECK(log_smooth_potential(x, pts, off, lambda) ==
            doctest::Approx(0.4 * 2.0 - 0.3).epsilon(1e-12));
    }
  }
  SUBCASE("two equal terms add ln(2)/lambda") {
    Mat pts(2, 1);
    pts << 1.0, -1.0;
    const Vec off = Vec::Zero(2);
    const Vec x = Vec::Zero(1);  // both pieces evaluate to 0
    for (double lambda : {2.0, 10.0, 100.0}) {
      CHECK(log_smooth_potential(x, pts, off, lambda) ==
            doctest::Approx(std::log(2.0) / lambda).epsilon(1e-12));
    }
  }
  SUBCASE("sandwich bound and monotone decrease in lambda") {
    SplitMix64 gen(8);
    Mat pts(7, 2);
    for (int i = 0; i < 7; ++i)
      for (int c = 0; c < 2; ++c) pts(i, c) = gen.next_normal();
    Vec off(7);
    for (int i = 0; i < 7; ++i) off[i] = gen.next_normal();
    const double lambdas[] = {2.0, 10.0, 100.0, 1e4};
    for (int t = 0; t < 50; ++t) {
      Vec x(2);
      for (int c = 0; c < 2; ++c) x[c] = 2.0 * gen.next_normal();
      const double f = max_affine(x, pts, off);
      double prev = std::numeric_limits<double>::infinity();
      for (double lambda : lambdas) {
        const double s = log_smooth_potential(x, pts, off, lambda);
        CHECK(s >= f - 1e-12);
        CHECK(s <= f + std::log(7.0) / lambda + 1e-12);
        CHECK(s <= prev + 1e-12);
        prev = s;
      }
    }
  }
  SUBCASE("no overflow for huge lambda*term") {
    Mat pts(2, 1);
    pts << 100.0, -50.0;
    Vec off(2);
    off << 30.0, 0.0;
    Vec x(1);
    x << 80.0;  // lambda * term up to 1e6 scale
    const double v = log_smooth_potential(x, pts, off, 125.0);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(100.0 * 80.0 + 30.0).epsilon(1e-12));
  }
}

TEST_CASE("gauge_fix") {
  SplitMix64 gen(9);
  const DualPotentials p = random_pots(5, 3, gen);
  const DualPotentials g = gauge_fix(p);
  SUBCASE("means match to machine precision") {
    CHECK(g.alpha.mean() == doctest::Approx(g.beta.mean()).epsilon(1e-14));
  }
  SUBCASE("idempotent") {
    const DualPotentials gg = gauge_fix(g);
    CHECK((gg.alpha - g.alpha).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((gg.beta - g.beta).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("class invariant") {
    const DualPotentials g2 = gauge_fix(shifted(p, 5.0));
    CHECK((g2.alpha - g.alpha).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g2.beta - g.beta).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("already balanced input is unchanged") {
    const DualPotentials g3 = gauge_fix(g);
    CHECK((g3.alpha - g.alpha).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("shape mismatches throw") {
  Mat pts(2, 2);
  pts << 1.0, 0.0, 0.0, 1.0;
  CHECK_THROWS_AS(max_affine(Vec::Zero(3), pts, Vec::Zero(2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(cell_index(Vec::Zero(2), pts, Vec::Zero(3)),
                  std::invalid_argument);
  DualPotentials p{Vec::Zero(2), Vec::Zero(2)};
  DualPotentials q{Vec::Zero(3), Vec::Zero(2)};
  CHECK_THROWS_AS(norm_l2_oplus(p, q), std::invalid_argument);
}

}  // TEST_SUITE
