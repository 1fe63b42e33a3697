#include <doctest.h>

#include <cmath>

#include "tsb/experiments.hpp"
#include "tsb/rng.hpp"

using namespace tsb;

namespace {

Problem default_problem(std::uint64_t seed = 1) {
  auto [mu, nu] = generate_marginals(10, 10, 2, seed);
  Vec mx(2), my(2);
  mx << 1.0, -0.5;
  my << -1.0, 0.8;
  return Problem(std::move(mu), std::move(nu),
                 GaussianReference(std::move(mx), std::move(my), -0.4));
}

Problem small_problem_1d(std::uint64_t seed = 2) {
  auto [mu, nu] = generate_marginals(2, 2, 1, seed);
  return Problem(std::move(mu), std::move(nu),
                 GaussianReference(Vec::Zero(1), Vec::Zero(1), 0.3));
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("small 1d sweep recovers the dimensional slope") {
  const Problem prob = small_problem_1d();
  BlowupConfig cfg;
  for (int k = 0; k <= 5; ++k) cfg.eps_list.push_back(std::pow(4.0, -k));
  cfg.solver.max_iters = 800;
  cfg.solver.batch_size = 8000;
  cfg.solver.seed = 12;
  const BlowupResult res = run_blowup_sweep(prob, cfg);

  CHECK(res.reference_slope == -1.0);
  REQUIRE(res.fit_points >= 3);
  CHECK(res.slope > -1.3);
  CHECK(res.slope < -0.7);

  SUBCASE("intercept drift approaches the discrete bridge entropy") {
    // Gap |I^eps + d ln eps - H| over the certified tail of the sweep.
    std::vector<double> gaps;
    for (const SweepLeg& leg : res.legs) {
      if (leg.certified) {
        gaps.push_back(std::abs(leg.i_eps + 1.0 * std::log(leg.eps) -
                                res.reference_entropy));
      }
    }
    REQUIRE(gaps.size() >= 3);
    CHECK(gaps.back() < 0.2);
    const std::size_t last = gaps.size() - 1;
    // Decreasing over the last three certified legs, within MC resolution.
    const double se_band =
        5.0 * (res.legs.back().i_eps_se + 0.02);
    CHECK(gaps[last] <= gaps[last - 2] + se_band);
  }
}

TEST_CASE("sweep validates the eps list") {
  const Problem prob = small_problem_1d();
  BlowupConfig cfg;
  cfg.eps_list = {0.25, 0.5};  // not decreasing
  CHECK_THROWS_AS(run_blowup_sweep(prob, cfg), std::invalid_argument);
  cfg.eps_list = {};
  CHECK_THROWS_AS(run_blowup_sweep(prob, cfg), std::invalid_argument);
}

TEST_CASE("residual decay fit") {
  SUBCASE("clean geometric decay") {
    std::vector<double> r;
    for (int t = 0; t < 200; ++t) r.push_back(3.0 * std::pow(0.95, t));
    const DecayFit fit = fit_residual_decay(r);
    CHECK(fit.slope == doctest::Approx(std::log(0.95)).epsilon(1e-6));
    CHECK(fit.r2 > 0.999);
    CHECK(fit.theta == doctest::Approx(0.95).epsilon(1e-6));
  }
  SUBCASE("noise floor cuts the window") {
    std::vector<double> r;
    for (int t = 0; t < 300; ++t)
      r.push_back(std::max(2.0 * std::pow(0.9, t), 1e-4));
    const DecayFit fit = fit_residual_decay(r);
    CHECK(fit.noise_floor == doctest::Approx(1e-4));
    CHECK(fit.slope == doctest::Approx(std::log(0.9)).epsilon(1e-3));
    CHECK(fit.window_size < 100);
  }
}

TEST_CASE("gradient ascent convergence study") {
  const Problem prob = default_problem();
  GradientAscentConfig cfg;
  cfg.max_iters = 400;
  cfg.batch_size = 2000;
  cfg.seed = 13;
  const ConvergenceStudy study = run_ga_convergence(prob, cfg);

  SUBCASE("initial residual is the init-to-final distance") {
    CHECK(study.trace.entries.front().residual_l2 ==
          doctest::Approx(norm_l2_oplus(study.trace.iterates.front(),
                                        study.trace.final))
              .epsilon(1e-12));
  }
  SUBCASE("fitted contraction factor lies in (0, 1)") {
    CHECK(study.fit.theta > 0.0);
    CHECK(study.fit.theta < 1.0);
    CHECK(study.fit.slope < 0.0);
  }
  SUBCASE("doubling the step size speeds the decay") {
    GradientAscentConfig faster = cfg;
    faster.step_size = 2.0 * cfg.step_size;
    const ConvergenceStudy fast = run_ga_convergence(prob, faster);
    CHECK(fast.fit.theta < study.fit.theta);
  }
}

TEST_CASE("sinkhorn convergence study") {
  const Problem prob = default_problem();
  SinkhornConfig cfg;
  cfg.max_iters = 120;
  cfg.batch_size = 2000;
  cfg.seed = 13;
  const ConvergenceStudy study = run_sinkhorn_convergence(prob, cfg);

  CHECK(study.fit.theta > 0.0);
  CHECK(study.fit.theta < 1.0);
  CHECK(study.trace.entries.front().residual_linf ==
        doctest::Approx(norm_linf_oplus(study.trace.iterates.front(),
                                        study.trace.final))
            .epsilon(1e-12));

  SUBCASE("lambda bias stays within the soft-max bound scale") {
    SinkhornConfig big = cfg;
    big.lambda = 100.0;
    const ConvergenceStudy fine = run_sinkhorn_convergence(prob, big);
    const double dist = norm_linf_oplus(study.trace.final, fine.trace.final);
    // Recorded, not asserted tightly: the bound is a heuristic scale.
    CHECK(dist < 10.0 * std::log(10.0) * (1.0 / 10.0 - 1.0 / 100.0) + 0.5);
  }
}

TEST_CASE("partition export") {
  const Problem prob = default_problem();

  SUBCASE("single point covers the whole grid") {
    Mat px = Mat::Zero(1, 2);
    Mat py = Mat::Ones(1, 2);
    const Problem single(DiscreteMeasure(px, Vec::Ones(1)),
                         DiscreteMeasure(py, Vec::Ones(1)),
                         GaussianReference(Vec::Zero(2), Vec::Zero(2), 0.0));
    const PartitionGrid grid = export_partition(
        single, {Vec::Zero(1), Vec::Zero(1)}, -3.0, 3.0, 8, 10, 1);
    for (int idx : grid.index_x) CHECK(idx == 0);
    for (int idx : grid.index_y) CHECK(idx == 0);
    CHECK(grid.overlay_x.rows() == 10);
  }

  SUBCASE("two symmetric points split along the bisector") {
    Mat px(2, 2);
    px << 1.0, 0.0, -1.0, 0.0;
    const Problem sym(DiscreteMeasure(px, Vec::Constant(2, 0.5)),
                      DiscreteMeasure(px, Vec::Constant(2, 0.5)),
                      GaussianReference(Vec::Zero(2), Vec::Zero(2), 0.0));
    const int res = 21;  // odd: grid points sit exactly on the bisector
    const PartitionGrid grid = export_partition(
        sym, {Vec::Zero(2), Vec::Zero(2)}, -3.0, 3.0, res, 0, 1);
    for (int iy = 0; iy < res; ++iy) {
      for (int ix = 0; ix < res; ++ix) {
        const double gx = -3.0 + 6.0 * ix / (res - 1);
        const int idx = grid.index_x[static_cast<std::size_t>(iy) * res + ix];
        if (gx > 1e-12) CHECK(idx == 0);
        if (gx < -1e-12) CHECK(idx == 1);
        if (std::abs(gx) <= 1e-12) CHECK(idx == 0);  // tie to lowest index
      }
    }
  }

  SUBCASE("d != 2 is rejected") {
    Mat px = Mat::Zero(1, 1);
    const Problem d1(DiscreteMeasure(px, Vec::Ones(1)),
                     DiscreteMeasure(px, Vec::Ones(1)),
                     GaussianReference(Vec::Zero(1), Vec::Zero(1), 0.0));
    CHECK_THROWS_AS(export_partition(d1, {Vec::Zero(1), Vec::Zero(1)}, -3.0,
                                     3.0, 10, 10, 1),
                    std::invalid_argument);
  }

  SUBCASE("deterministic given the seed") {
    SplitMix64 gen(44);
    DualPotentials pots{Vec(10), Vec(10)};
    for (int i = 0; i < 10; ++i) {
      pots.alpha[i] = 0.3 * gen.next_normal();
      pots.beta[i] = 0.3 * gen.next_normal();
    }
    const PartitionGrid g1 = export_partition(prob, pots, -3.0, 3.0, 40, 25, 9);
    const PartitionGrid g2 = export_partition(prob, pots, -3.0, 3.0, 40, 25, 9);
    CHECK(g1.index_x == g2.index_x);
    CHECK(g1.overlay_x == g2.overlay_x);
  }
}

}  // TEST_SUITE
