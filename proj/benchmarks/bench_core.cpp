#include <benchmark/benchmark.h>

#include "tsb/discrete_bridge.hpp"
#include "tsb/estimators.hpp"
#include "tsb/rng.hpp"
#include "tsb/solvers.hpp"

namespace {

tsb::Problem default_problem() {
  auto [mu, nu] = tsb::generate_marginals(10, 10, 2, 1);
  tsb::Vec mx(2), my(2);
  mx << 1.0, -0.5;
  my << -1.0, 0.8;
  return tsb::Problem(std::move(mu), std::move(nu),
                      tsb::GaussianReference(std::move(mx), std::move(my), -0.4));
}

tsb::DualPotentials some_pots(const tsb::Problem& prob) {
  tsb::SplitMix64 gen(3);
  tsb::DualPotentials p{tsb::Vec(prob.n()), tsb::Vec(prob.m())};
  for (int i = 0; i < prob.n(); ++i) p.alpha[i] = 0.3 * gen.next_normal();
  for (int j = 0; j < prob.m(); ++j) p.beta[j] = 0.3 * gen.next_normal();
  return p;
}

void BM_Sample(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::sample(prob.ref, n, seed++));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Sample)->Arg(1000)->Arg(8000)->Arg(64000);

void BM_EvaluateDual(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const int n = static_cast<int>(state.range(0));
  const tsb::BatchContext ctx(prob, tsb::sample(prob.ref, n, 1));
  const tsb::DualPotentials pots = some_pots(prob);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::evaluate_dual(prob, pots, 1.0, ctx));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EvaluateDual)->Arg(1000)->Arg(8000)->Arg(64000);

void BM_EvaluateDualThreaded(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const tsb::BatchContext ctx(prob, tsb::sample(prob.ref, 64000, 1),
                              static_cast<int>(state.range(0)));
  const tsb::DualPotentials pots = some_pots(prob);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::evaluate_dual(prob, pots, 1.0, ctx));
  }
}
BENCHMARK(BM_EvaluateDualThreaded)->Arg(1)->Arg(2)->Arg(4);

void BM_SinkhornIntegrals(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const int n = static_cast<int>(state.range(0));
  const tsb::BatchContext ctx(prob, tsb::sample(prob.ref, n, 1));
  const tsb::DualPotentials pots = some_pots(prob);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::log_sinkhorn_integrals(prob, pots, 10.0, ctx));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SinkhornIntegrals)->Arg(1000)->Arg(8000)->Arg(64000);

void BM_CellMassMatrix(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const tsb::BatchContext ctx(prob, tsb::sample(prob.ref, 8000, 1));
  const tsb::DualPotentials pots = some_pots(prob);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::cell_mass_matrix(prob, pots, 0.25, ctx));
  }
}
BENCHMARK(BM_CellMassMatrix);

void BM_DiscreteSinkhorn(benchmark::State& state) {
  const tsb::Problem prob = default_problem();
  const tsb::Mat sigma = tsb::build_limit_sigma(prob);
  const tsb::DiscreteBridgeProblem dbp(sigma, prob.mu.weights(),
                                       prob.nu.weights());
  for (auto _ : state) {
    benchmark::DoNotOptimize(tsb::solve_discrete_sinkhorn(dbp, 1e-12));
  }
}
BENCHMARK(BM_DiscreteSinkhorn);

}  // namespace

BENCHMARK_MAIN();
