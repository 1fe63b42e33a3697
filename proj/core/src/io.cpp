#include "tsb/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace tsb {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  return out;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path);
  }
  Json j;
  in >> j;
  return j;
}

Vec vec_from(const Json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Mat mat_from(const Json& j) {
  const auto rows = j.size();
  if (rows == 0) throw std::runtime_error("empty point list in problem file");
  const auto cols = j[0].size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw std::runtime_error("ragged point list in problem file");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

}  // namespace

Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json to_json(const Mat& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    j.push_back(std::move(row));
  }
  return j;
}

ProblemFile load_problem(const std::string& path) {
  const Json j = load_json(path);
  const int dim = j.at("dim").get<int>();
  Mat px = mat_from(j.at("points_x"));
  Mat py = mat_from(j.at("points_y"));
  if (px.cols() != dim || py.cols() != dim) {
    throw std::runtime_error("problem file: point dimension differs from dim");
  }
  DiscreteMeasure mu(std::move(px), vec_from(j.at("weights_a")));
  DiscreteMeasure nu(std::move(py), vec_from(j.at("weights_b")));
  GaussianReference ref(vec_from(j.at("mean_x")), vec_from(j.at("mean_y")),
                        j.at("corr").get<double>());
  ProblemSeeds seeds;
  if (j.contains("seeds")) {
    seeds.generate = j.at("seeds").value("generate", std::uint64_t{0});
    seeds.batch = j.at("seeds").value("batch", std::uint64_t{0});
  }
  return ProblemFile{Problem(std::move(mu), std::move(nu), std::move(ref)), seeds};
}

void save_problem(const ProblemFile& pf, const std::string& path) {
  Json j;
  j["dim"] = pf.problem.dim();
  j["points_x"] = to_json(pf.problem.mu.points());
  j["weights_a"] = to_json(pf.problem.mu.weights());
  j["points_y"] = to_json(pf.problem.nu.points());
  j["weights_b"] = to_json(pf.problem.nu.weights());
  j["mean_x"] = to_json(pf.problem.ref.mean_x());
  j["mean_y"] = to_json(pf.problem.ref.mean_y());
  j["corr"] = pf.problem.ref.corr();
  j["seeds"] = Json{{"generate", pf.seeds.generate}, {"batch", pf.seeds.batch}};
  open_out(path) << j.dump(2) << "\n";
}

void save_potentials(const std::string& path, const DualPotentials& pots,
                     const std::string& method, const Json& config_echo,
                     const Json& certificate) {
  const DualPotentials fixed = gauge_fix(pots);
  Json j;
  j["alpha"] = to_json(fixed.alpha);
  j["beta"] = to_json(fixed.beta);
  j["method"] = method;
  j["config"] = config_echo;
  j["certificate"] = certificate;
  open_out(path) << j.dump(2) << "\n";
}

DualPotentials load_potentials(const std::string& path) {
  const Json j = load_json(path);
  return {vec_from(j.at("alpha")), vec_from(j.at("beta"))};
}

void write_trace_csv(const SolveTrace& trace, bool linf_residual,
                     const std::string& path) {
  auto out = open_out(path);
  out << "iter,objective,objective_se,grad_or_step_norm,residual_to_final\n";
  for (const TraceEntry& e : trace.entries) {
    const double res = linf_residual ? e.residual_linf : e.residual_l2;
    out << e.iter << ',' << fmt(e.objective) << ',' << fmt(e.objective_se) << ','
        << fmt(e.grad_or_step_norm) << ',' << fmt(res) << '\n';
  }
}

void write_blowup_csv(const BlowupResult& result, const std::string& path) {
  auto out = open_out(path);
  out << "eps,ln_eps,I_eps,grad_norm,flag\n";
  for (const SweepLeg& leg : result.legs) {
    out << fmt(leg.eps) << ',' << fmt(std::log(leg.eps)) << ','
        << fmt(leg.i_eps) << ',' << fmt(leg.grad_norm) << ','
        << (leg.certified ? 0 : 1) << '\n';
  }
}

void write_blowup_summary(const BlowupResult& result, const Json& config_echo,
                          const std::string& path) {
  Json j;
  j["slope"] = result.slope;
  j["intercept"] = result.intercept;
  j["reference_slope"] = result.reference_slope;
  j["reference_entropy"] = result.reference_entropy;
  j["fit_points"] = result.fit_points;
  Json legs = Json::array();
  for (const SweepLeg& leg : result.legs) {
    Json l;
    l["eps"] = leg.eps;
    l["I_eps"] = leg.i_eps;
    l["I_eps_se"] = leg.i_eps_se;
    l["grad_norm"] = leg.grad_norm;
    l["marginal_violation"] = leg.marginal_violation;
    l["certified"] = leg.certified;
    l["overflow"] = leg.overflow_flagged;
    l["mass_ess"] = leg.masses.ess;
    l["max_mass_std_error"] = leg.masses.std_errors.maxCoeff();
    l["cost_x"] = leg.costs.cost_x.value;
    l["cost_y"] = leg.costs.cost_y.value;
    l["cost_ess"] = leg.costs.ess;
    l["fallback_iters"] = leg.fallback_iters;
    l["masses"] = to_json(leg.masses.masses);
    legs.push_back(std::move(l));
  }
  j["legs"] = std::move(legs);
  j["reference_coupling"] = to_json(result.reference_coupling);
  j["config"] = config_echo;
  open_out(path) << j.dump(2) << "\n";
}

void write_partition_csv(const PartitionGrid& grid, const std::string& path_x,
                         const std::string& path_y) {
  const double step = (grid.hi - grid.lo) / (grid.resolution - 1);
  auto write_one = [&](const std::vector<int>& index, const std::string& path) {
    auto out = open_out(path);
    out << "gx,gy,index\n";
    for (int iy = 0; iy < grid.resolution; ++iy) {
      for (int ix = 0; ix < grid.resolution; ++ix) {
        out << fmt(grid.lo + step * ix) << ',' << fmt(grid.lo + step * iy) << ','
            << index[static_cast<std::size_t>(iy) * grid.resolution + ix] << '\n';
      }
    }
  };
  write_one(grid.index_x, path_x);
  write_one(grid.index_y, path_y);
}

namespace {

const char* kPalette[20] = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_partition_svg(const PartitionGrid& grid, const std::string& path) {
  const int panel = 420;
  const int gap = 20;
  const double scale = static_cast<double>(panel) / (grid.hi - grid.lo);
  const double cell = static_cast<double>(panel) / grid.resolution;
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (2 * panel + gap)
      << "\" height=\"" << panel << "\">\n";

  auto draw_panel = [&](const std::vector<int>& index, const Mat& overlay,
                        double off_x) {
    for (int iy = 0; iy < grid.resolution; ++iy) {
      // y axis points up in data coordinates, down in SVG.
      const double py = panel - (iy + 1) * cell;
      int ix = 0;
      while (ix < grid.resolution) {
        // Merge horizontal runs of equal color into one rectangle.
        const int idx = index[static_cast<std::size_t>(iy) * grid.resolution + ix];
        int run = 1;
        while (ix + run < grid.resolution &&
               index[static_cast<std::size_t>(iy) * grid.resolution + ix + run] == idx) {
          ++run;
        }
        out << "<rect x=\"" << fmt(off_x + ix * cell) << "\" y=\"" << fmt(py)
            << "\" width=\"" << fmt(run * cell) << "\" height=\"" << fmt(cell)
            << "\" fill=\"" << kPalette[idx % 20] << "\"/>\n";
        ix += run;
      }
    }
    for (Eigen::Index k = 0; k < overlay.rows(); ++k) {
      const double cx = off_x + (overlay(k, 0) - grid.lo) * scale;
      const double cy = panel - (overlay(k, 1) - grid.lo) * scale;
      if (cx < off_x || cx > off_x + panel || cy < 0 || cy > panel) continue;
      out << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy)
          << "\" r=\"1.5\" fill=\"black\" fill-opacity=\"0.5\"/>\n";
    }
  };

  draw_panel(grid.index_x, grid.overlay_x, 0.0);
  draw_panel(grid.index_y, grid.overlay_y, panel + gap);
  out << "</svg>\n";
}

void write_limit_report(const BlowupReference& ref, const Json& config_echo,
                        const std::string& path) {
  Json j;
  j["sigma"] = to_json(ref.sigma);
  j["coupling"] = to_json(ref.bridge.coupling);
  j["p"] = to_json(ref.bridge.p);
  j["q"] = to_json(ref.bridge.q);
  j["entropy"] = ref.bridge.entropy;
  j["iterations"] = ref.bridge.iterations;
  j["marginal_violation"] = ref.bridge.marginal_violation;
  j["config"] = config_echo;
  open_out(path) << j.dump(2) << "\n";
}

}  // namespace tsb
