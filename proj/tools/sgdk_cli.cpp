// Command-line front end: model generation, threshold tables, experiment runs,
// summaries, figure data and the acceptance suite.
#include "sgdk/sgdk.hpp"
#include "sgdk/verify.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sgdk;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

int cmd_gen_models(const std::string& family, std::uint64_t seed, const fs::path& out) {
  if (family != "qc" && family != "st") throw std::invalid_argument("--family must be qc or st");
  fs::create_directories(out);
  for (const Model& m : generate_models(family, seed)) {
    const fs::path file = out / (model_name(m) + ".json");
    write_text_file(file, model_to_json(m).dump(2) + "\n");
    std::cout << file.string() << '\n';
  }
  return 0;
}

int cmd_thresholds(const std::vector<fs::path>& files, const std::string& k_list, const std::vector<std::string>& minimizers,
                   const GeometryOptions& gopt, const fs::path& out) {
  std::vector<ThresholdRow> rows;
  for (const fs::path& f : files) {
    const nlohmann::json j = read_json_file(f);
    if (j.contains("family")) {
      const Model m = model_from_json(j);
      const auto tokens = k_list.empty() ? default_k_tokens(model_family(m)) : parse_k_list(k_list);
      auto part = threshold_table({m}, tokens, gopt, minimizers);
      rows.insert(rows.end(), part.begin(), part.end());
    } else {
      const auto tokens = parse_k_list(k_list.empty() ? "1,10,100,inf" : k_list);
      auto part = quadratic_threshold_table(f.stem().string(), quadratic_from_json(j), tokens);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  std::ofstream os = open_out(out);
  write_threshold_csv(os, rows);
  int errors = 0;
  for (const auto& r : rows)
    if (!r.error.empty()) {
      ++errors;
      std::cerr << r.model << " k=" << r.k_token << ": " << r.error << '\n';
    }
  std::cout << rows.size() << " rows written to " << out.string() << '\n';
  return errors == 0 ? 0 : 1;
}

int cmd_run(const fs::path& plan_path, const fs::path& out, const fs::path& cells_out, std::size_t threads) {
  const ExperimentPlan plan = plan_from_json(read_json_file(plan_path), plan_path.parent_path());
  const PlanResult res = run_plan(plan, threads);
  {
    std::ofstream os = open_out(out);
    write_trajectory_csv(os, res);
  }
  if (!cells_out.empty()) {
    std::ofstream os = open_out(cells_out);
    write_cells_csv(os, res);
  }
  int errors = 0;
  std::size_t failed_runs = 0;
  for (const auto& c : res.cells) {
    if (!c.cell.error.empty()) {
      ++errors;
      std::cerr << c.cell.id << ": " << c.cell.error << '\n';
    }
    failed_runs += c.summary.failed;
  }
  std::cout << res.cells.size() << " cells, " << failed_runs << " flagged runs, " << errors << " unresolved cells\n";
  return errors == 0 ? 0 : 1;
}

int cmd_summarize(const fs::path& in, const fs::path& cells, const fs::path& out, const DivergenceCriteria& criteria) {
  std::ifstream is = open_in(in);
  const TrajectoryTable table = read_trajectory_csv(is);
  std::map<CellKey, double> bands;
  if (!cells.empty()) {
    std::ifstream cs = open_in(cells);
    bands = read_cell_bands(cs);
  }
  std::vector<std::pair<CellKey, CellSummary>> rows;
  int errors = 0;
  for (const CellKey& key : table.order) {
    std::vector<TrajectoryRun> runs;
    for (const auto& r : table.cells.at(key))
      if (r.run >= 0) runs.push_back(r);
    if (runs.empty()) {
      ++errors;
      std::cerr << key.model << ' ' << key.method << ' ' << key.k << ' ' << key.rate << ' ' << key.init_radius
                << ": no runs in cell\n";
      continue;
    }
    std::optional<double> band;
    if (const auto it = bands.find(key); it != bands.end() && std::isfinite(it->second)) band = it->second;
    rows.emplace_back(key, summarize_runs(runs, std::stod(key.init_radius), criteria, band));
  }
  std::ofstream os = open_out(out);
  if (out.extension() == ".json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [k, s] : rows) arr.push_back(to_json(k, s));
    os << arr.dump(2) << '\n';
  } else {
    os << summary_csv_header() << '\n';
    for (const auto& [k, s] : rows) os << summary_csv_row(k, s) << '\n';
  }
  std::cout << rows.size() << " cells summarized\n";
  return errors == 0 ? 0 : 1;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
  return s;
}

std::string log10_field(double d) {
  if (!std::isfinite(d)) return "nan";
  if (d <= 0.0) return "-inf";
  return format_double(std::log10(d));
}

/// One file per (model.minimizer, init radius): iteration vs log10 distance for every run of every (k, rate).
int cmd_figure_data(const fs::path& in, const fs::path& out_dir) {
  std::ifstream is = open_in(in);
  const TrajectoryTable table = read_trajectory_csv(is);
  fs::create_directories(out_dir);
  std::map<std::string, std::vector<CellKey>> groups;
  std::vector<std::string> order;
  for (const CellKey& key : table.order) {
    const std::string g = key.model + "_r" + key.init_radius;
    if (!groups.count(g)) order.push_back(g);
    groups[g].push_back(key);
  }
  std::ofstream index = open_out(out_dir / "index.csv");
  index << "file,model,init_radius,cells\n";
  for (const std::string& g : order) {
    const fs::path file = out_dir / (sanitize(g) + ".csv");
    std::ofstream os = open_out(file);
    os << "method,k,rate,run,iter,log10_dist_ref,log10_dist_alt\n";
    for (const CellKey& key : groups[g]) {
      for (const auto& r : table.cells.at(key)) {
        if (r.run < 0) continue;
        for (std::size_t n = 0; n < r.dist_ref.size(); ++n)
          os << key.method << ',' << key.k << ',' << key.rate << ',' << r.run << ',' << n << ',' << log10_field(r.dist_ref[n])
             << ',' << log10_field(n < r.dist_alt.size() ? r.dist_alt[n] : std::nan("")) << '\n';
      }
    }
    const CellKey& first = groups[g].front();
    index << file.filename().string() << ',' << first.model << ',' << first.init_radius << ',' << groups[g].size() << '\n';
  }
  std::cout << order.size() << " figure files written to " << out_dir.string() << '\n';
  return 0;
}

int cmd_verify(const std::vector<int>& only, std::uint64_t qc_seed, std::uint64_t st_seed, std::uint64_t master) {
  acceptance::VerifyOptions opt;
  opt.only.insert(only.begin(), only.end());
  opt.qc_model_seed = qc_seed;
  opt.st_model_seed = st_seed;
  opt.master_seed = master;
  const auto results = acceptance::run_acceptance(opt, std::cout);
  return acceptance::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD-k divergence and convergence thresholds: models, tables, experiments"};
  app.require_subcommand(1);

  std::string family;
  std::uint64_t seed = 0;
  fs::path out;
  auto* gen = app.add_subcommand("gen-models", "generate the QC or ST model set as JSON files");
  gen->add_option("--family", family, "qc or st")->required()->check(CLI::IsMember({"qc", "st"}));
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--out", out, "output directory")->required();

  std::vector<fs::path> model_files;
  std::string k_list;
  std::vector<std::string> minimizers;
  GeometryOptions gopt;
  auto* thr = app.add_subcommand("thresholds", "threshold table for model JSON files");
  thr->add_option("--model", model_files, "model JSON (QC, ST or stochastic quadratic); repeatable")->required()->check(CLI::ExistingFile);
  thr->add_option("--k", k_list, "comma-separated batch sizes: integers, inf, or multiples of kmax_div / kmax_conv");
  thr->add_option("--minimizers", minimizers, "restrict to these minimizers");
  thr->add_option("--epsilon", gopt.epsilon, "ball radius for the local geometry");
  thr->add_option("--samples", gopt.n_samples, "Monte-Carlo samples for the local geometry");
  thr->add_option("--geometry-seed", gopt.seed, "seed for the ball samples");
  thr->add_option("--out", out, "output CSV")->required();

  fs::path plan_path;
  fs::path cells_path;
  std::size_t threads = 0;
  auto* run = app.add_subcommand("run", "run an experiment plan and write per-iteration distances");
  run->add_option("--plan", plan_path, "plan JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "trajectory CSV")->required();
  run->add_option("--cells", cells_path, "optional per-cell CSV with thresholds, bands and summaries");
  run->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  fs::path in_path;
  DivergenceCriteria criteria;
  auto* sum = app.add_subcommand("summarize", "per-cell summary of a trajectory CSV (CSV or .json output)");
  sum->add_option("--in", in_path, "trajectory CSV")->required()->check(CLI::ExistingFile);
  sum->add_option("--cells", cells_path, "cells CSV from run --cells, enables the boundedness column")->check(CLI::ExistingFile);
  sum->add_option("--out", out, "summary CSV, or JSON when the name ends in .json")->required();
  sum->add_option("--factor", criteria.factor, "growth factor for divergence");
  sum->add_option("--min-rate", criteria.min_rate, "minimum fitted rate for divergence");
  sum->add_option("--min-r2", criteria.min_r2, "minimum fit quality for divergence");

  auto* fig = app.add_subcommand("figure-data", "iteration vs log10 distance files, one per model, minimizer and radius");
  fig->add_option("--in", in_path, "trajectory CSV")->required()->check(CLI::ExistingFile);
  fig->add_option("--out", out, "output directory")->required();

  std::vector<int> only;
  std::uint64_t qc_seed = acceptance::VerifyOptions{}.qc_model_seed;
  std::uint64_t st_seed = acceptance::VerifyOptions{}.st_model_seed;
  std::uint64_t master = acceptance::VerifyOptions{}.master_seed;
  auto* ver = app.add_subcommand("verify", "run the acceptance suite");
  ver->add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 10));
  ver->add_option("--qc-seed", qc_seed, "QC model generator seed");
  ver->add_option("--st-seed", st_seed, "ST model generator seed");
  ver->add_option("--master-seed", master, "master seed for the runs");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_models(family, seed, out);
    if (*thr) return cmd_thresholds(model_files, k_list, minimizers, gopt, out);
    if (*run) return cmd_run(plan_path, out, cells_path, threads);
    if (*sum) return cmd_summarize(in_path, cells_path, out, criteria);
    if (*fig) return cmd_figure_data(in_path, out);
    if (*ver) return cmd_verify(only, qc_seed, st_seed, master);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
