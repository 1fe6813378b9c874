#pragma once
/// Executes experiment plans: resolves thresholds per cell, runs the SGD-k
/// ensembles and writes trajectory and cell files in deterministic order.

#include "sgdk/experiments/classify.hpp"
#include "sgdk/experiments/models.hpp"
#include "sgdk/experiments/plan.hpp"
#include "sgdk/experiments/summary.hpp"
#include "sgdk/mechanism.hpp"
#include "sgdk/sgd.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace sgdk {

/// One fully specified factor combination.
struct Cell {
  std::size_t model_index = 0;
  std::string model;
  std::string minimizer;
  std::string alt_minimizer;
  BatchSize k = BatchSize::finite(1);
  RateSpec rate_spec;
  double rate = 0.0;
  double init_radius = 0.0;
  ThresholdReport thresholds;  ///< at the cell's batch size
  double noise_trace = 0.0;    ///< tr Cov of component gradients at the minimizer
  double band = 0.0;           ///< stability band for the boundedness check
  std::string id;
  std::string error;           ///< nonempty when the cell could not be resolved

  [[nodiscard]] CellKey key() const {
    return {model + "." + minimizer, k.is_infinite() ? "gd" : "sgd", k.to_string(), format_double(rate),
            format_double(init_radius)};
  }
};

struct CellResult {
  Cell cell;
  std::vector<RunRecord> runs;
  CellSummary summary;
};

struct PlanResult {
  std::vector<Model> models;
  std::map<std::string, LocalGeometry> geometry;  ///< keyed by "<model>.<minimizer>"
  std::vector<CellResult> cells;
};

/// Evaluates a step-size expression against a local geometry.
inline double resolve_rate(const RateSpec& spec, const LocalGeometry& geom, BatchSize k) {
  if (spec.explicit_value) return *spec.explicit_value;
  double v = 0.0;
  for (const RateTerm& t : spec.terms) {
    const ThresholdReport rep = mechanism_thresholds(geom, t.at_k.value_or(k));
    v += t.coef * (t.symbol == 'l' ? rep.div_lb : rep.conv_ub);
  }
  if (!(v > 0.0)) throw std::invalid_argument("rate '" + spec.text + "' resolved to a nonpositive value");
  return v;
}

/// Geometry for every (model, minimizer) pair of the plan, in plan order.
inline std::map<std::string, LocalGeometry> plan_geometry(const ExperimentPlan& plan, const std::vector<Model>& models,
                                                           std::map<std::string, std::string>* errors = nullptr) {
  std::map<std::string, LocalGeometry> out;
  for (const auto& m : models) {
    for (const auto& which : plan.minimizers) {
      const std::string key = model_name(m) + "." + which;
      try {
        out.emplace(key, model_local_geometry(m, which, plan.geometry));
      } catch (const std::exception& e) {
        if (errors) (*errors)[key] = e.what();
      }
    }
  }
  return out;
}

inline std::vector<Cell> build_cells(const ExperimentPlan& plan, const std::vector<Model>& models,
                                     const std::map<std::string, LocalGeometry>& geometry,
                                     const std::map<std::string, std::string>& geometry_errors = {}) {
  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const Model& m = models[mi];
    for (const auto& which : plan.minimizers) {
      const std::string gkey = model_name(m) + "." + which;
      const auto git = geometry.find(gkey);
      for (const BatchSize k : plan.methods) {
        for (const RateSpec& rs : plan.rates) {
          for (const double radius : plan.radii) {
            Cell c;
            c.model_index = mi;
            c.model = model_name(m);
            c.minimizer = which;
            c.alt_minimizer = model_other_minimizer(m, which);
            c.k = k;
            c.rate_spec = rs;
            c.init_radius = radius;
            c.id = gkey + "|" + k.to_string() + "|" + rs.text + "|" + format_double(radius);
            try {
              if (git == geometry.end()) {
                const auto eit = geometry_errors.find(gkey);
                throw std::runtime_error(eit != geometry_errors.end() ? eit->second : "geometry unavailable");
              }
              const LocalGeometry& g = git->second;
              c.thresholds = mechanism_thresholds(g, k);
              c.rate = resolve_rate(rs, g, k);
              c.noise_trace = model_gradient_noise_trace(m, model_minimizer(m, which));
              c.band = stability_band(g.lambdas, g.t_f, c.noise_trace, c.rate, k);
            } catch (const std::exception& e) {
              c.error = e.what();
              c.rate = rs.explicit_value.value_or(std::numeric_limits<double>::quiet_NaN());
            }
            cells.push_back(std::move(c));
          }
        }
      }
    }
  }
  return cells;
}

inline std::vector<TrajectoryRun> as_trajectories(const std::vector<RunRecord>& runs) {
  std::vector<TrajectoryRun> out;
  out.reserve(runs.size());
  for (const auto& r : runs)
    out.push_back({static_cast<long long>(r.factors.run_index), r.distances, r.alt_distances, r.failed});
  return out;
}

inline CellResult run_cell(const Model& model, const Cell& cell, const ExperimentPlan& plan) {
  CellResult res;
  res.cell = cell;
  if (!cell.error.empty()) return res;
  const Vec center = model_minimizer(model, cell.minimizer);
  RunOptions opts;
  opts.box = model_box(model);
  opts.reference = center;
  opts.alt_reference = model_minimizer(model, cell.alt_minimizer);
  opts.record_iterates = plan.record_iterates;
  res.runs.reserve(plan.runs_per_cell);
  for (std::size_t r = 0; r < plan.runs_per_cell; ++r) {
    const std::uint64_t seed = run_seed(plan.master_seed, cell.id, r);
    Rng init_rng(hash_combine(seed, 0x1417u));
    const Vec theta0 = uniform_in_ball(center, cell.init_radius, init_rng);
    RunFactors f;
    f.model = cell.model;
    f.init_radius = cell.init_radius;
    f.reference = cell.minimizer;
    f.run_index = r;
    res.runs.push_back(std::visit(
        [&](const auto& m) {
          return run(m, theta0, StepSchedule::constant(cell.rate), cell.k, plan.max_iters, seed, opts, f);
        },
        model));
  }
  res.summary = summarize_runs(as_trajectories(res.runs), cell.init_radius, plan.criteria, cell.band);
  return res;
}

/// Runs every cell; cells execute in parallel, results keep plan order.
inline PlanResult run_plan(const ExperimentPlan& plan, std::size_t threads = 0) {
  plan.validate();
  PlanResult out;
  out.models = load_plan_models(plan);
  std::map<std::string, std::string> geometry_errors;
  out.geometry = plan_geometry(plan, out.models, &geometry_errors);
  const std::vector<Cell> cells = build_cells(plan, out.models, out.geometry, geometry_errors);
  out.cells.resize(cells.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out.cells[i] = run_cell(out.models[cells[i].model_index], cells[i], plan);
      } catch (const std::exception& e) {
        out.cells[i].cell = cells[i];
        out.cells[i].cell.error = e.what();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

/// One row per (run, iteration); a failed run ends with a row whose iter is -1
/// and whose distances are NaN; an unresolvable cell is a single such row with run -1.
inline void write_trajectory_csv(std::ostream& os, const PlanResult& res) {
  os << trajectory_csv_header() << '\n';
  for (const auto& cr : res.cells) {
    const CellKey key = cr.cell.key();
    const std::string prefix =
        key.model + ',' + key.method + ',' + key.k + ',' + key.rate + ',' + key.init_radius + ',';
    if (!cr.cell.error.empty()) {
      os << prefix << "-1,-1,nan,nan\n";
      continue;
    }
    for (const auto& r : cr.runs) {
      for (std::size_t n = 0; n < r.distances.size(); ++n) {
        os << prefix << r.factors.run_index << ',' << n << ',' << format_double(r.distances[n]) << ','
           << format_double(n < r.alt_distances.size() ? r.alt_distances[n] : std::numeric_limits<double>::quiet_NaN())
           << '\n';
      }
      if (r.failed) os << prefix << r.factors.run_index << ",-1,nan,nan\n";
    }
  }
}

inline const char* cells_csv_header() {
  return "model,method,k,rate,init_radius,rate_spec,conv_ub,div_lb,band,runs,failed,frac_diverged,frac_10x,"
         "frac_bounded,median_rate,min_final,max_final,max_dist,error";
}

inline void write_cells_csv(std::ostream& os, const PlanResult& res) {
  os << cells_csv_header() << '\n';
  for (const auto& cr : res.cells) {
    const CellKey key = cr.cell.key();
    const CellSummary& s = cr.summary;
    std::string err = cr.cell.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << key.model << ',' << key.method << ',' << key.k << ',' << key.rate << ',' << key.init_radius << ','
       << cr.cell.rate_spec.text << ',' << format_double(cr.cell.thresholds.conv_ub) << ','
       << format_double(cr.cell.thresholds.div_lb) << ',' << format_double(cr.cell.band) << ',' << s.runs << ','
       << s.failed << ',' << format_double(s.frac_diverged) << ',' << format_double(s.frac_10x) << ','
       << format_double(s.frac_bounded) << ',' << format_double(s.median_rate) << ',' << format_double(s.min_final)
       << ',' << format_double(s.max_final) << ',' << format_double(s.max_dist) << ',' << err << '\n';
  }
}

}  // namespace sgdk
