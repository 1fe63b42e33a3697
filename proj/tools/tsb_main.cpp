// tsb: semi-discrete transport-relaxed Schrodinger bridge solver.
//
// Subcommands: generate, solve, blowup, partition, limit. Every run is a
// pure function of its inputs and seeds; artifacts embed the resolved config
// so each output is reproducible from its own metadata.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "tsb/discrete_bridge.hpp"
#include "tsb/experiments.hpp"
#include "tsb/io.hpp"
#include "tsb/rng.hpp"
#include "tsb/solvers.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct GlobalOpts {
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out = ".";
  int batch_size = 8000;
  bool strict = false;
  int threads = 1;
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  return (std::filesystem::path(g.out) / name).string();
}

tsb::Json global_echo(const GlobalOpts& g) {
  return tsb::Json{{"seed", g.seed},
                   {"batch_size", g.batch_size},
                   {"strict", g.strict},
                   {"threads", g.threads}};
}

// Effective seeds: --seed wins, then the problem file, then 1.
std::uint64_t effective_batch_seed(const GlobalOpts& g, const tsb::ProblemFile& pf) {
  if (g.seed_set) return g.seed;
  return pf.seeds.batch != 0 ? pf.seeds.batch : g.seed;
}

struct GenerateOpts {
  int n = 10;
  int m = 10;
  int dim = 2;
  double corr = -0.4;
  std::vector<double> mean_x;
  std::vector<double> mean_y;
  std::vector<double> box_x = {-1.0, 1.0};
  std::vector<double> box_y = {-2.0, 1.0};
  std::string out_file = "problem.json";
};

int cmd_generate(const GlobalOpts& g, const GenerateOpts& o) {
  auto [mu, nu] = tsb::generate_marginals(o.n, o.m, o.dim, g.seed,
                                          {o.box_x[0], o.box_x[1]},
                                          {o.box_y[0], o.box_y[1]});
  tsb::Vec mean_x(o.dim), mean_y(o.dim);
  if (!o.mean_x.empty()) {
    if (static_cast<int>(o.mean_x.size()) != o.dim) {
      std::cerr << "generate: --mean-x needs " << o.dim << " values\n";
      return kExitValidation;
    }
    for (int c = 0; c < o.dim; ++c) mean_x[c] = o.mean_x[static_cast<std::size_t>(c)];
  } else if (o.dim == 2) {
    mean_x << 1.0, -0.5;
  } else {
    mean_x.setZero();
  }
  if (!o.mean_y.empty()) {
    if (static_cast<int>(o.mean_y.size()) != o.dim) {
      std::cerr << "generate: --mean-y needs " << o.dim << " values\n";
      return kExitValidation;
    }
    for (int c = 0; c < o.dim; ++c) mean_y[c] = o.mean_y[static_cast<std::size_t>(c)];
  } else if (o.dim == 2) {
    mean_y << -1.0, 0.8;
  } else {
    mean_y.setZero();
  }

  tsb::ProblemFile pf{
      tsb::Problem(std::move(mu), std::move(nu),
                   tsb::GaussianReference(std::move(mean_x), std::move(mean_y), o.corr)),
      {g.seed, tsb::SplitMix64::derive(g.seed, 0x6261746368ULL)}};
  const std::string path = out_path(g, o.out_file);
  tsb::save_problem(pf, path);
  std::cout << "wrote " << path << " (n=" << o.n << ", m=" << o.m
            << ", d=" << o.dim << ")\n";
  return 0;
}

struct SolveOpts {
  std::string problem;
  std::string method = "ga";
  double eta = 0.01;
  int iters = -1;  // method-dependent default
  double lambda = 10.0;
  double eps = 1.0;
  double tol = 0.0;
  bool refresh_batch = false;
  std::string pots_file;
  std::string trace_file;
};

int cmd_solve(const GlobalOpts& g, const SolveOpts& o) {
  const tsb::ProblemFile pf = tsb::load_problem(o.problem);
  const std::uint64_t seed = effective_batch_seed(g, pf);
  const tsb::DualPotentials init = tsb::zero_potentials(pf.problem);

  tsb::DualPotentials pots{tsb::Vec(), tsb::Vec()};
  tsb::SolveTrace trace;
  tsb::Json cfg_echo;
  bool linf_residual = false;
  std::string default_trace;

  if (o.method == "ga") {
    tsb::GradientAscentConfig cfg;
    cfg.step_size = o.eta;
    cfg.max_iters = o.iters > 0 ? o.iters : 2000;
    cfg.grad_tol = o.tol;
    cfg.batch_size = g.batch_size;
    cfg.seed = seed;
    cfg.eps = o.eps;
    cfg.refresh_batch = o.refresh_batch;
    cfg.n_threads = g.threads;
    std::tie(pots, trace) = tsb::solve_gradient_ascent(pf.problem, init, cfg);
    cfg_echo = tsb::Json{{"method", "ga"},
                         {"step_size", cfg.step_size},
                         {"max_iters", cfg.max_iters},
                         {"grad_tol", cfg.grad_tol},
                         {"batch_size", cfg.batch_size},
                         {"seed", cfg.seed},
                         {"eps", cfg.eps},
                         {"refresh_batch", cfg.refresh_batch}};
    default_trace = "ga_trace.csv";
  } else if (o.method == "sinkhorn") {
    tsb::SinkhornConfig cfg;
    cfg.lambda = o.lambda;
    cfg.max_iters = o.iters > 0 ? o.iters : 500;
    cfg.fixed_point_tol = o.tol;
    cfg.batch_size = g.batch_size;
    cfg.seed = seed;
    cfg.refresh_batch = o.refresh_batch;
    cfg.n_threads = g.threads;
    std::tie(pots, trace) = tsb::solve_sinkhorn(pf.problem, init, cfg);
    cfg_echo = tsb::Json{{"method", "sinkhorn"},
                         {"lambda", cfg.lambda},
                         {"max_iters", cfg.max_iters},
                         {"fixed_point_tol", cfg.fixed_point_tol},
                         {"batch_size", cfg.batch_size},
                         {"seed", cfg.seed},
                         {"refresh_batch", cfg.refresh_batch}};
    linf_residual = true;
    default_trace = "sk_trace.csv";
  } else {
    std::cerr << "solve: unknown method '" << o.method << "'\n";
    return kExitValidation;
  }
  cfg_echo["global"] = global_echo(g);
  cfg_echo["problem"] = o.problem;

  const std::string trace_path =
      out_path(g, o.trace_file.empty() ? default_trace : o.trace_file);
  tsb::write_trace_csv(trace, linf_residual, trace_path);

  const tsb::TraceEntry& last = trace.entries.back();
  tsb::Json certificate{{"termination", tsb::to_string(trace.termination)},
                        {"final_grad_or_step_norm", last.grad_or_step_norm},
                        {"final_objective", last.objective},
                        {"final_objective_se", last.objective_se},
                        {"overflow_flagged", trace.overflow_flagged}};
  const std::string pots_path =
      out_path(g, o.pots_file.empty() ? "potentials_" + o.method + ".json" : o.pots_file);
  tsb::save_potentials(pots_path, pots, o.method, cfg_echo, certificate);

  std::cout << o.method << ": " << tsb::to_string(trace.termination)
            << ", certificate " << last.grad_or_step_norm << ", objective "
            << last.objective << " (se " << last.objective_se << ")\n"
            << "wrote " << pots_path << " and " << trace_path << "\n";

  if (trace.termination == tsb::Termination::nonfinite_iterate) {
    std::cerr << "solve: iterate became non-finite\n";
    return kExitNumerical;
  }
  if (g.strict && trace.overflow_flagged) {
    std::cerr << "solve: estimate hit the exponent cap (--strict)\n";
    return kExitNumerical;
  }
  return 0;
}

struct BlowupOpts {
  std::string problem;
  std::vector<double> eps_list;
  int iters = 1000;
  double eta = 0.01;
  double cert_tol = 1e-3;
  int fit_smallest = 0;
};

int cmd_blowup(const GlobalOpts& g, const BlowupOpts& o) {
  const tsb::ProblemFile pf = tsb::load_problem(o.problem);
  tsb::BlowupConfig cfg;
  if (o.eps_list.empty()) {
    for (int k = 0; k <= 7; ++k) cfg.eps_list.push_back(std::pow(4.0, -k));
  } else {
    cfg.eps_list = o.eps_list;
  }
  cfg.solver.step_size = o.eta;
  cfg.solver.max_iters = o.iters;
  cfg.solver.batch_size = g.batch_size;
  cfg.solver.seed = effective_batch_seed(g, pf);
  cfg.solver.n_threads = g.threads;
  cfg.cert_violation_tol = o.cert_tol;
  cfg.fit_smallest_k = o.fit_smallest;

  const tsb::BlowupResult result = tsb::run_blowup_sweep(pf.problem, cfg);

  tsb::Json echo{{"problem", o.problem},
                 {"eps_list", cfg.eps_list},
                 {"iters", o.iters},
                 {"eta", o.eta},
                 {"cert_tol", o.cert_tol},
                 {"fit_smallest", o.fit_smallest},
                 {"global", global_echo(g)}};
  tsb::write_blowup_csv(result, out_path(g, "blowup.csv"));
  tsb::write_blowup_summary(result, echo, out_path(g, "blowup_summary.json"));

  std::cout << "slope " << result.slope << " (reference " << result.reference_slope
            << "), intercept " << result.intercept << " (reference "
            << result.reference_entropy << "), " << result.fit_points
            << " certified points\n"
            << "wrote " << out_path(g, "blowup.csv") << " and "
            << out_path(g, "blowup_summary.json") << "\n";

  bool any_overflow = false;
  for (const tsb::SweepLeg& leg : result.legs) any_overflow |= leg.overflow_flagged;
  if (g.strict && any_overflow) {
    std::cerr << "blowup: a leg hit the exponent cap (--strict)\n";
    return kExitNumerical;
  }
  return 0;
}

struct PartitionOpts {
  std::string problem;
  std::string potentials;
  std::vector<double> bounds = {-3.0, 3.0};
  int resolution = 300;
  int overlay = 2000;
  std::string prefix = "partition";
};

int cmd_partition(const GlobalOpts& g, const PartitionOpts& o) {
  const tsb::ProblemFile pf = tsb::load_problem(o.problem);
  const tsb::DualPotentials pots = tsb::load_potentials(o.potentials);
  const tsb::PartitionGrid grid =
      tsb::export_partition(pf.problem, pots, o.bounds[0], o.bounds[1],
                            o.resolution, o.overlay, effective_batch_seed(g, pf));
  const std::string px = out_path(g, o.prefix + "_x.csv");
  const std::string py = out_path(g, o.prefix + "_y.csv");
  const std::string svg = out_path(g, o.prefix + ".svg");
  tsb::write_partition_csv(grid, px, py);
  tsb::write_partition_svg(grid, svg);
  std::cout << "wrote " << px << ", " << py << ", " << svg << "\n";
  return 0;
}

struct LimitOpts {
  std::string problem;
  std::string out_file = "limit.json";
};

int cmd_limit(const GlobalOpts& g, const LimitOpts& o) {
  const tsb::ProblemFile pf = tsb::load_problem(o.problem);
  const tsb::BlowupReference ref = tsb::blowup_reference_values(pf.problem);
  tsb::Json echo{{"problem", o.problem}, {"global", global_echo(g)}};
  const std::string path = out_path(g, o.out_file);
  tsb::write_limit_report(ref, echo, path);
  std::cout << "discrete bridge entropy " << ref.bridge.entropy << " ("
            << ref.bridge.iterations << " iterations, violation "
            << ref.bridge.marginal_violation << ")\nwrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-discrete transport-relaxed Schrodinger bridge solver"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global seed")->each([&](const std::string&) {
    g.seed_set = true;
  });
  app.add_option("--out", g.out, "output directory");
  app.add_option("--batch-size", g.batch_size, "Monte Carlo batch size");
  app.add_flag("--strict", g.strict, "treat flagged estimates as fatal");
  app.add_option("--threads", g.threads, "estimator worker threads");

  GenerateOpts gen;
  CLI::App* c_gen = app.add_subcommand("generate", "write a problem file");
  c_gen->add_option("--n", gen.n, "first marginal size");
  c_gen->add_option("--m", gen.m, "second marginal size");
  c_gen->add_option("--dim", gen.dim, "space dimension");
  c_gen->add_option("--corr", gen.corr, "reference correlation in (-1,1)");
  c_gen->add_option("--mean-x", gen.mean_x, "reference mean of X")->expected(-1);
  c_gen->add_option("--mean-y", gen.mean_y, "reference mean of Y")->expected(-1);
  c_gen->add_option("--box-x", gen.box_x, "support box for x points")->expected(2);
  c_gen->add_option("--box-y", gen.box_y, "support box for y points")->expected(2);
  c_gen->add_option("--file", gen.out_file, "output file name");

  SolveOpts sol;
  CLI::App* c_sol = app.add_subcommand("solve", "run a dual solver");
  c_sol->add_option("--problem", sol.problem, "problem file")->required();
  c_sol->add_option("--method", sol.method, "ga or sinkhorn");
  c_sol->add_option("--eta", sol.eta, "gradient ascent step size");
  c_sol->add_option("--iters", sol.iters, "iteration budget");
  c_sol->add_option("--lambda", sol.lambda, "Sinkhorn smoothing (> 2)");
  c_sol->add_option("--eps", sol.eps, "penalty scale for gradient ascent");
  c_sol->add_option("--tol", sol.tol, "stop tolerance (0: run full budget)");
  c_sol->add_flag("--refresh-batch", sol.refresh_batch, "redraw the batch per iteration");
  c_sol->add_option("--potentials-file", sol.pots_file, "potentials output name");
  c_sol->add_option("--trace-file", sol.trace_file, "trace CSV output name");

  BlowupOpts blo;
  CLI::App* c_blo = app.add_subcommand("blowup", "penalty sweep with slope fit");
  c_blo->add_option("--problem", blo.problem, "problem file")->required();
  c_blo->add_option("--eps-list", blo.eps_list, "decreasing eps values")->expected(-1);
  c_blo->add_option("--iters", blo.iters, "iterations per eps");
  c_blo->add_option("--eta", blo.eta, "initial step size");
  c_blo->add_option("--cert-tol", blo.cert_tol, "certificate threshold");
  c_blo->add_option("--fit-smallest", blo.fit_smallest, "fit only k smallest eps");

  PartitionOpts par;
  CLI::App* c_par = app.add_subcommand("partition", "export max-affine cell grids");
  c_par->add_option("--problem", par.problem, "problem file")->required();
  c_par->add_option("--potentials", par.potentials, "potentials file")->required();
  c_par->add_option("--bounds", par.bounds, "grid box lo hi")->expected(2);
  c_par->add_option("--resolution", par.resolution, "grid points per axis");
  c_par->add_option("--overlay-samples", par.overlay, "overlay sample count");
  c_par->add_option("--prefix", par.prefix, "output name prefix");

  LimitOpts lim;
  CLI::App* c_lim = app.add_subcommand("limit", "discrete bridge limit report");
  c_lim->add_option("--problem", lim.problem, "problem file")->required();
  c_lim->add_option("--file", lim.out_file, "output file name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gen->parsed()) return cmd_generate(g, gen);
    if (c_sol->parsed()) return cmd_solve(g, sol);
    if (c_blo->parsed()) return cmd_blowup(g, blo);
    if (c_par->parsed()) return cmd_partition(g, par);
    if (c_lim->parsed()) return cmd_limit(g, lim);
  } catch (const tsb::ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
