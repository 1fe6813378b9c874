#pragma once
/// A closed set of nonconvex model families behind one value type, with
/// loading, saving and local-geometry helpers.

#include "sgdk/mechanism.hpp"
#include "sgdk/problems/qc.hpp"
#include "sgdk/problems/st.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sgdk {

using Model = std::variant<QcSumsModel, StSumsModel>;

inline const std::string& model_name(const Model& m) {
  return std::visit([](const auto& x) -> const std::string& { return x.name(); }, m);
}

inline std::string model_family(const Model& m) { return std::holds_alternative<QcSumsModel>(m) ? "qc" : "st"; }

inline std::vector<std::string> minimizer_names(const Model& m) {
  if (std::holds_alternative<QcSumsModel>(m)) return {"quad", "circ"};
  return {"flattest", "sharpest"};
}

inline Vec model_minimizer(const Model& m, const std::string& which) {
  return std::visit([&](const auto& x) { return x.minimizer(which); }, m);
}

inline std::string model_other_minimizer(const Model& m, const std::string& which) {
  return std::visit([&](const auto& x) { return std::decay_t<decltype(x)>::other_minimizer(which); }, m);
}

inline Box model_box(const Model& m) {
  if (std::holds_alternative<QcSumsModel>(m)) return QcSumsModel::box();
  return std::get<StSumsModel>(m).box();
}

inline nlohmann::json model_to_json(const Model& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

inline Model model_from_json(const nlohmann::json& j) {
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "qc") return qc_model_from_json(j);
  if (fam == "st") return st_model_from_json(j);
  throw std::invalid_argument("unknown model family '" + fam + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline Model load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

/// Generated models of a family in their canonical order.
inline std::vector<Model> generate_models(const std::string& family, std::uint64_t seed) {
  std::vector<Model> out;
  if (family == "qc") {
    for (auto& m : generate_qc_models(seed)) out.emplace_back(std::move(m));
  } else if (family == "st") {
    for (auto& m : generate_st_models(seed)) out.emplace_back(std::move(m));
  } else {
    throw std::invalid_argument("unknown family '" + family + "' (expected qc or st)");
  }
  return out;
}

/// Settings of the ball-averaged geometry estimate.
struct GeometryOptions {
  double epsilon = kDefaultEpsilon;
  std::size_t n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  double rank_tol = kDefaultRankTol;
};

inline LocalGeometry model_local_geometry(const Model& m, const std::string& which, const GeometryOptions& opt) {
  const Vec center = model_minimizer(m, which);
  const std::uint64_t seed = hash_combine(opt.seed, fnv1a(model_name(m) + "." + which));
  return std::visit(
      [&](const auto& x) { return local_geometry(x, center, opt.epsilon, opt.n_samples, seed, opt.rank_tol); }, m);
}

/// Trace of the covariance of component gradients at x.
template <Mixture F>
double gradient_noise_trace(const F& f, const Vec& x) {
  const Vec mean = f.expected_gradient(x);
  double second = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) second += f.probs()[i] * f.gradient(i, x).squaredNorm();
  return std::max(0.0, second - mean.squaredNorm());
}

inline double model_gradient_noise_trace(const Model& m, const Vec& x) {
  return std::visit([&](const auto& f) { return gradient_noise_trace(f, x); }, m);
}

}  // namespace sgdk
