#pragma once
/// Experiment plans: factor grids over models, minimizers, batch sizes, step
/// sizes and initialization radii.

#include "sgdk/experiments/classify.hpp"
#include "sgdk/experiments/models.hpp"
#include "sgdk/thresholds.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sgdk {

/// One term of a step-size expression: coef * (l or u) evaluated at batch size at_k
/// (the cell's own batch size when absent).
struct RateTerm {
  double coef = 1.0;
  char symbol = 'l';  ///< 'l' = div_lb, 'u' = conv_ub
  std::optional<BatchSize> at_k;
};

/// A step size: either an explicit number or a sum of threshold-relative terms.
struct RateSpec {
  std::string text;
  std::optional<double> explicit_value;
  std::vector<RateTerm> terms;

  [[nodiscard]] bool is_relative() const { return !explicit_value.has_value(); }
};

namespace detail {

inline double parse_coef(const std::string& s) {
  if (s.empty()) return 1.0;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad coefficient '" + s + "'");
  return v;
}

inline std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

}  // namespace detail

/// Parses "1.5l", "0.5u", "0.5(u+l)", "0.25l@1+0.75l@inf", or a plain number.
inline RateSpec parse_rate(const std::string& raw) {
  RateSpec spec;
  spec.text = detail::strip_spaces(raw);
  const std::string& s = spec.text;
  if (s.empty()) throw std::invalid_argument("empty rate");
  char* end = nullptr;
  const double number = std::strtod(s.c_str(), &end);
  if (end == s.c_str() + s.size()) {
    if (!(number > 0.0) || !std::isfinite(number)) throw std::invalid_argument("rate must be positive: " + s);
    spec.explicit_value = number;
    return spec;
  }
  static const std::regex paren(R"(^([0-9.eE+-]*?)\*?\((u\+l|l\+u)\)(?:@(\w+))?$)");
  static const std::regex term(R"(^([0-9.eE-]*?)\*?([lu])(?:@(\w+))?$)");
  std::smatch mt;
  if (std::regex_match(s, mt, paren)) {
    const double c = detail::parse_coef(mt[1]);
    std::optional<BatchSize> at;
    if (mt[3].matched) at = BatchSize::parse(mt[3].str());
    spec.terms = {{c, 'u', at}, {c, 'l', at}};
    return spec;
  }
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t plus = s.find('+', start);
    while (plus != std::string::npos && plus > 0 && (s[plus - 1] == 'e' || s[plus - 1] == 'E')) plus = s.find('+', plus + 1);
    const std::string piece = s.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    if (!std::regex_match(piece, mt, term)) throw std::invalid_argument("cannot parse rate '" + s + "'");
    RateTerm t;
    t.coef = detail::parse_coef(mt[1]);
    t.symbol = mt[2].str()[0];
    if (mt[3].matched) t.at_k = BatchSize::parse(mt[3].str());
    spec.terms.push_back(t);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return spec;
}

inline std::string rate_text(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return format_double(j.get<double>());
  throw std::invalid_argument("rate must be a number or a string");
}

/// A batch-size column: a literal k, or a multiple of k_max_div / k_max_conv.
struct KToken {
  std::string text;
  std::optional<BatchSize> literal;
  double coef = 1.0;
  bool use_conv = false;

  /// Resolves against a report's k_max values; the result is at least 1.
  [[nodiscard]] BatchSize resolve(const ThresholdReport& any) const {
    if (literal) return *literal;
    const double base = static_cast<double>(use_conv ? any.k_max_conv : any.k_max_div);
    const long long k = std::llround(coef * base);
    return BatchSize::finite(static_cast<std::uint64_t>(std::max(1LL, k)));
  }
};

inline KToken parse_k_token(const std::string& raw) {
  KToken t;
  t.text = detail::strip_spaces(raw);
  static const std::regex rel(R"(^([0-9.eE-]*?)\*?kmax(?:_(div|conv))?$)");
  std::smatch m;
  if (std::regex_match(t.text, m, rel)) {
    t.coef = detail::parse_coef(m[1]);
    t.use_conv = m[2].matched && m[2].str() == "conv";
    return t;
  }
  t.literal = BatchSize::parse(t.text);
  return t;
}

inline std::vector<KToken> parse_k_list(const std::string& csv) {
  std::vector<KToken> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string piece = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!detail::strip_spaces(piece).empty()) out.push_back(parse_k_token(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Where the models of a plan come from.
struct ModelSource {
  std::optional<std::uint64_t> generate_seed;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> names;  ///< optional filter by model name
};

struct ExperimentPlan {
  std::string family = "qc";
  ModelSource models;
  std::vector<std::string> minimizers;
  std::vector<BatchSize> methods;
  std::vector<double> radii;
  std::vector<RateSpec> rates;
  std::size_t runs_per_cell = 100;
  std::size_t max_iters = 20;
  std::uint64_t master_seed = 0;
  GeometryOptions geometry;
  DivergenceCriteria criteria;
  bool record_iterates = false;

  void validate() const {
    if (family != "qc" && family != "st") throw std::invalid_argument("plan: family must be qc or st");
    if (methods.empty() || radii.empty() || rates.empty()) throw std::invalid_argument("plan: empty factor list");
    for (double r : radii)
      if (!(r >= 0.0)) throw std::invalid_argument("plan: radii must be nonnegative");
    if (runs_per_cell == 0 || max_iters == 0) throw std::invalid_argument("plan: runs and iterations must be positive");
  }
};

/// Defaults follow the family: QC uses {quad, circ}, k in {1, inf}, radius 1e-8;
/// ST uses {flattest, sharpest}, k in {1, 200, 500, inf}, radii {1e-3, 1e-2, 1e-1, 1}.
inline ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentPlan p;
  p.family = j.value("family", std::string("qc"));
  const bool qc = p.family == "qc";
  if (j.contains("models")) {
    const auto& m = j.at("models");
    if (m.is_object()) {
      if (m.contains("generate_seed")) p.models.generate_seed = m.at("generate_seed").get<std::uint64_t>();
      if (m.contains("names")) p.models.names = m.at("names").get<std::vector<std::string>>();
      if (m.contains("files"))
        for (const auto& f : m.at("files")) p.models.files.push_back(base_dir / f.get<std::string>());
    } else {
      for (const auto& f : m) p.models.files.push_back(base_dir / f.get<std::string>());
    }
  }
  if (!p.models.generate_seed && p.models.files.empty()) p.models.generate_seed = 0;
  p.minimizers = j.contains("minimizers") ? j.at("minimizers").get<std::vector<std::string>>()
                                          : (qc ? std::vector<std::string>{"quad", "circ"}
                                                : std::vector<std::string>{"flattest", "sharpest"});
  if (j.contains("methods")) {
    for (const auto& k : j.at("methods"))
      p.methods.push_back(k.is_string() ? BatchSize::parse(k.get<std::string>()) : BatchSize::finite(k.get<std::uint64_t>()));
  } else if (qc) {
    p.methods = {BatchSize::finite(1), BatchSize::infinite()};
  } else {
    p.methods = {BatchSize::finite(1), BatchSize::finite(200), BatchSize::finite(500), BatchSize::infinite()};
  }
  p.radii = j.contains("radii") ? j.at("radii").get<std::vector<double>>()
                                : (qc ? std::vector<double>{1e-8} : std::vector<double>{1e-3, 1e-2, 1e-1, 1.0});
  if (j.contains("rates")) {
    for (const auto& r : j.at("rates")) p.rates.push_back(parse_rate(rate_text(r)));
  } else {
    for (const char* r : {"1.5l", "0.5(u+l)", "0.5u"}) p.rates.push_back(parse_rate(r));
  }
  p.runs_per_cell = j.value("runs_per_cell", std::size_t{100});
  p.max_iters = j.value("max_iters", std::size_t{20});
  p.master_seed = j.value("master_seed", std::uint64_t{0});
  p.geometry.epsilon = j.value("epsilon", kDefaultEpsilon);
  p.geometry.n_samples = j.value("n_samples", kDefaultSamples);
  p.geometry.seed = j.value("geometry_seed", std::uint64_t{0});
  p.record_iterates = j.value("record_iterates", false);
  if (j.contains("criteria")) {
    const auto& c = j.at("criteria");
    p.criteria.factor = c.value("factor", p.criteria.factor);
    p.criteria.min_rate = c.value("min_rate", p.criteria.min_rate);
    p.criteria.min_r2 = c.value("min_r2", p.criteria.min_r2);
    p.criteria.escape_radius = c.value("escape_radius", p.criteria.escape_radius);
    p.criteria.onset_factor = c.value("onset_factor", p.criteria.onset_factor);
    p.criteria.min_fit_points = c.value("min_fit_points", p.criteria.min_fit_points);
  }
  p.validate();
  return p;
}

inline std::vector<Model> load_plan_models(const ExperimentPlan& p) {
  std::vector<Model> all;
  if (p.models.generate_seed) all = generate_models(p.family, *p.models.generate_seed);
  for (const auto& f : p.models.files) all.push_back(load_model(f));
  if (p.models.names.empty()) return all;
  std::vector<Model> out;
  for (const auto& name : p.models.names) {
    bool found = false;
    for (const auto& m : all)
      if (model_name(m) == name) {
        out.push_back(m);
        found = true;
      }
    if (!found) throw std::invalid_argument("plan: no model named '" + name + "'");
  }
  return out;
}

}  // namespace sgdk
