#pragma once
/// Per-cell summaries of trajectory ensembles and the trajectory CSV format.

#include "sgdk/experiments/classify.hpp"
#include "sgdk/quadratic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgdk {

/// Identifies a cell in CSV files.
struct CellKey {
  std::string model;  ///< "<model>.<minimizer>"
  std::string method; ///< "sgd" or "gd"
  std::string k;
  std::string rate;
  std::string init_radius;

  auto operator<=>(const CellKey&) const = default;
};

/// The distances of one run as read back from a trajectory file.
struct TrajectoryRun {
  long long run = 0;
  std::vector<double> dist_ref;
  std::vector<double> dist_alt;
  bool failed = false;
};

struct CellSummary {
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t diverged = 0;
  std::size_t grew = 0;
  std::size_t bounded = 0;
  double frac_diverged = 0.0;
  double frac_10x = 0.0;
  double frac_bounded = std::numeric_limits<double>::quiet_NaN();
  double median_rate = std::numeric_limits<double>::quiet_NaN();
  double min_final = std::numeric_limits<double>::quiet_NaN();
  double max_final = std::numeric_limits<double>::quiet_NaN();
  double max_dist = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Summarizes runs of one cell. A failed run counts as neither diverged nor bounded.
/// band is the stability band for the boundedness check (absent: not evaluated).
inline CellSummary summarize_runs(const std::vector<TrajectoryRun>& runs, double init_radius,
                                  const DivergenceCriteria& criteria, std::optional<double> band) {
  if (runs.empty()) throw std::invalid_argument("summarize: empty cell");
  CellSummary s;
  s.runs = runs.size();
  std::vector<double> rates;
  std::vector<double> finals;
  double maxd = 0.0;
  for (const auto& r : runs) {
    if (r.failed) {
      ++s.failed;
      continue;
    }
    const DivergenceVerdict v = classify_divergence(r.dist_ref, criteria);
    if (v.diverged) ++s.diverged;
    if (v.grew) ++s.grew;
    if (v.fit_ok) rates.push_back(v.fit.rate);
    if (!r.dist_ref.empty()) finals.push_back(r.dist_ref.back());
    maxd = std::max(maxd, max_distance(r.dist_ref));
    if (band && is_bounded(r.dist_ref, init_radius, *band, criteria.factor)) ++s.bounded;
  }
  const double n = static_cast<double>(s.runs);
  s.frac_diverged = static_cast<double>(s.diverged) / n;
  s.frac_10x = static_cast<double>(s.grew) / n;
  if (band) s.frac_bounded = static_cast<double>(s.bounded) / n;
  s.median_rate = median(rates);
  if (!finals.empty()) {
    s.min_final = *std::min_element(finals.begin(), finals.end());
    s.max_final = *std::max_element(finals.begin(), finals.end());
    s.max_dist = maxd;
  }
  return s;
}

inline const char* trajectory_csv_header() { return "model,method,k,rate,init_radius,run,iter,dist_ref,dist_alt"; }

inline const char* summary_csv_header() {
  return "model,method,k,rate,init_radius,runs,failed,frac_diverged,frac_10x,frac_bounded,median_rate,min_final,max_final,max_dist";
}

inline std::string summary_csv_row(const CellKey& key, const CellSummary& s) {
  std::ostringstream os;
  os << key.model << ',' << key.method << ',' << key.k << ',' << key.rate << ',' << key.init_radius << ',' << s.runs
     << ',' << s.failed << ',' << format_double(s.frac_diverged) << ',' << format_double(s.frac_10x) << ','
     << format_double(s.frac_bounded) << ',' << format_double(s.median_rate) << ',' << format_double(s.min_final)
     << ',' << format_double(s.max_final) << ',' << format_double(s.max_dist);
  return os.str();
}

inline nlohmann::json to_json(const CellKey& key, const CellSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"model", key.model},       {"method", key.method},         {"k", key.k},
          {"rate", key.rate},         {"init_radius", key.init_radius}, {"runs", s.runs},
          {"failed", s.failed},       {"frac_diverged", s.frac_diverged}, {"frac_10x", s.frac_10x},
          {"frac_bounded", num(s.frac_bounded)}, {"median_rate", num(s.median_rate)},
          {"min_final", num(s.min_final)}, {"max_final", num(s.max_final)}, {"max_dist", num(s.max_dist)}};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_csv_double(const std::string& s) {
  if (s.empty() || s == "nan" || s == "NaN" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

/// A trajectory file grouped into cells in first-appearance order.
struct TrajectoryTable {
  std::vector<CellKey> order;
  std::map<CellKey, std::vector<TrajectoryRun>> cells;
};

inline TrajectoryTable read_trajectory_csv(std::istream& in) {
  TrajectoryTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trajectory csv: empty input");
  const auto header = split_csv_line(line);
  if (header.size() != 9 || header[0] != "model" || header[8] != "dist_alt")
    throw std::invalid_argument("trajectory csv: unexpected header");
  std::map<CellKey, std::map<long long, std::size_t>> run_slot;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw std::invalid_argument("trajectory csv: line " + std::to_string(lineno) + " has wrong field count");
    CellKey key{f[0], f[1], f[2], f[3], f[4]};
    auto [it, fresh] = t.cells.try_emplace(key);
    if (fresh) t.order.push_back(key);
    const long long run = std::stoll(f[5]);
    const long long iter = std::stoll(f[6]);
    auto& slots = run_slot[key];
    auto [sit, new_run] = slots.try_emplace(run, it->second.size());
    if (new_run) it->second.push_back(TrajectoryRun{run, {}, {}, false});
    TrajectoryRun& r = it->second[sit->second];
    if (iter < 0) {
      r.failed = true;
      continue;
    }
    if (static_cast<std::size_t>(iter) != r.dist_ref.size())
      throw std::invalid_argument("trajectory csv: line " + std::to_string(lineno) + " iterations out of order");
    r.dist_ref.push_back(parse_csv_double(f[7]));
    r.dist_alt.push_back(parse_csv_double(f[8]));
  }
  return t;
}

/// Stability bands keyed by cell, read from a cells file written by the runner.
inline std::map<CellKey, double> read_cell_bands(std::istream& in) {
  std::map<CellKey, double> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"model", "method", "k", "rate", "init_radius", "band"})
    if (!col.count(need)) throw std::invalid_argument(std::string("cells csv: missing column ") + need);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw std::invalid_argument("cells csv: wrong field count");
    CellKey key{f[col["model"]], f[col["method"]], f[col["k"]], f[col["rate"]], f[col["init_radius"]]};
    out[key] = parse_csv_double(f[col["band"]]);
  }
  return out;
}

}  // namespace sgdk
