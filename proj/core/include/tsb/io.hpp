#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "tsb/experiments.hpp"

namespace tsb {

// Insertion-ordered JSON so written artifacts keep a stable field layout.
using Json = nlohmann::ordered_json;

struct ProblemSeeds {
  std::uint64_t generate = 0;  // seed the supports were drawn with
  std::uint64_t batch = 0;     // default Monte Carlo seed for this problem
};

struct ProblemFile {
  Problem problem;
  ProblemSeeds seeds;
};

// Problem files carry: dim, points_x, weights_a, points_y, weights_b,
// mean_x, mean_y, corr, seeds.
ProblemFile load_problem(const std::string& path);
void save_problem(const ProblemFile& pf, const std::string& path);

// Potentials files carry the gauge-fixed pair plus the method name, the
// resolved config echo, and the stationarity certificate of the run.
void save_potentials(const std::string& path, const DualPotentials& pots,
                     const std::string& method, const Json& config_echo,
                     const Json& certificate);
DualPotentials load_potentials(const std::string& path);

// Per-iteration trace: iter, objective, objective_se, grad_or_step_norm,
// residual_to_final. The residual column is l2-oplus for gradient ascent
// and linf-oplus for the Sinkhorn-type iteration.
void write_trace_csv(const SolveTrace& trace, bool linf_residual,
                     const std::string& path);

// Sweep series: eps, ln_eps, I_eps, grad_norm, flag (0 = certified).
void write_blowup_csv(const BlowupResult& result, const std::string& path);
void write_blowup_summary(const BlowupResult& result, const Json& config_echo,
                          const std::string& path);

// Grid series: gx, gy, index.
void write_partition_csv(const PartitionGrid& grid, const std::string& path_x,
                         const std::string& path_y);
void write_partition_svg(const PartitionGrid& grid, const std::string& path);

void write_limit_report(const BlowupReference& ref, const Json& config_echo,
                        const std::string& path);

Json to_json(const Vec& v);
Json to_json(const Mat& m);

}  // namespace tsb
