#pragma once
/// Quadratic-circle sums: a two-dimensional nonconvex mixture whose components
/// are the pointwise minimum of a parabolic-valley basin and a radial
/// smoothstep basin.

#include "sgdk/linalg.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/random.hpp"
#include "sgdk/sgd.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgdk {

/// Quintic smoothstep s(t) = t^3 (6t^2 - 15t + 10) and its first two derivatives.
struct Smoothstep {
  static constexpr double value(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }
  static constexpr double d1(double t) { return 30.0 * t * t * (t - 1.0) * (t - 1.0); }
  static constexpr double d2(double t) { return 60.0 * t * (t - 1.0) * (2.0 * t - 1.0); }
};

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct Eval2 {
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();
  Mat2 hessian = Mat2::Zero();
};

/// Which piece of a component is active at a point.
enum class QcBranch { quadratic, circle_inner, circle_ramp, circle_outer };

struct QcComponent {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 1.0, c4 = 0.0;

  void validate() const {
    const std::array<double, 7> all{q1, q2, q3, c1, c2, c3, c4};
    for (double v : all)
      if (!std::isfinite(v)) throw std::invalid_argument("qc component: non-finite parameter");
    if (q1 < 0.0 || q2 < 0.0) throw std::invalid_argument("qc component: q1 and q2 must be nonnegative");
    if (c1 < 0.0 || c2 < 0.0 || c4 < 0.0) throw std::invalid_argument("qc component: c1, c2, c4 must be nonnegative");
    if (!(c3 > c2)) throw std::invalid_argument("qc component: c3 must exceed c2");
  }

  /// g(x) = q1 (x2 - q2 x1^2 - q3)^2
  [[nodiscard]] Eval2 quadratic_basin(const Vec2& x) const {
    const double u = x(1) - q2 * x(0) * x(0) - q3;
    const double du1 = -2.0 * q2 * x(0);
    Eval2 e;
    e.value = q1 * u * u;
    e.gradient << 2.0 * q1 * u * du1, 2.0 * q1 * u;
    e.hessian(0, 0) = 2.0 * q1 * (du1 * du1 - 2.0 * q2 * u);
    e.hessian(0, 1) = e.hessian(1, 0) = 2.0 * q1 * du1;
    e.hessian(1, 1) = 2.0 * q1;
    return e;
  }

  /// Radial basin: c4 inside radius c2, c4 + c1 outside c3, smoothstep between.
  [[nodiscard]] Eval2 circular_basin(const Vec2& x, QcBranch* branch = nullptr) const {
    const double r = x.norm();
    Eval2 e;
    if (r <= c2) {
      e.value = c4;
      if (branch) *branch = QcBranch::circle_inner;
      return e;
    }
    if (r >= c3) {
      e.value = c4 + c1;
      if (branch) *branch = QcBranch::circle_outer;
      return e;
    }
    if (branch) *branch = QcBranch::circle_ramp;
    const double w = c3 - c2;
    const double t = (r - c2) / w;
    const double h1 = c1 * Smoothstep::d1(t) / w;
    const double h2 = c1 * Smoothstep::d2(t) / (w * w);
    const Vec2 xh = x / r;
    e.value = c4 + c1 * Smoothstep::value(t);
    e.gradient = h1 * xh;
    const Mat2 outer = xh * xh.transpose();
    e.hessian = h2 * outer + (h1 / r) * (Mat2::Identity() - outer);
    return e;
  }

  /// min(g, h); ties go to g.
  [[nodiscard]] Eval2 eval(const Vec2& x, QcBranch* branch = nullptr) const {
    Eval2 g = quadratic_basin(x);
    QcBranch hb = QcBranch::circle_ramp;
    Eval2 h = circular_basin(x, &hb);
    if (g.value <= h.value) {
      if (branch) *branch = QcBranch::quadratic;
      return g;
    }
    if (branch) *branch = hb;
    return h;
  }
};

/// A weighted mixture of QC components on the box (-10,10) x (-20,15).
class QcSumsModel {
 public:
  QcSumsModel(std::string name, std::vector<QcComponent> comps, std::vector<double> probs)
      : name_(std::move(name)), comps_(std::move(comps)), probs_(std::move(probs)) {
    if (comps_.empty() || comps_.size() != probs_.size()) throw std::invalid_argument("qc model: bad component list");
    double total = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      comps_[i].validate();
      if (!(probs_[i] > 0.0)) throw std::invalid_argument("qc model: probabilities must be positive");
      total += probs_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("qc model: probabilities must sum to 1");
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] std::size_t size() const { return comps_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return 2; }
  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] const std::vector<QcComponent>& components() const { return comps_; }

  [[nodiscard]] static Vec circ_min() { return Vec::Zero(2); }
  [[nodiscard]] static Vec quad_min() { return (Vec(2) << 0.0, -15.0).finished(); }
  [[nodiscard]] static Box box() { return {(Vec(2) << -10.0, -20.0).finished(), (Vec(2) << 10.0, 15.0).finished()}; }

  [[nodiscard]] double value(std::size_t i, const Vec& x) const { return comps_[i].eval(x).value; }
  [[nodiscard]] Vec gradient(std::size_t i, const Vec& x) const { return comps_[i].eval(x).gradient; }
  void accumulate_gradient(std::size_t i, const Vec& x, Vec& acc) const { acc += comps_[i].eval(x).gradient; }
  [[nodiscard]] Mat hessian(std::size_t i, const Vec& x) const { return comps_[i].eval(x).hessian; }

  [[nodiscard]] double expected_value(const Vec& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < size(); ++i) v += probs_[i] * value(i, x);
    return v;
  }
  [[nodiscard]] Vec expected_gradient(const Vec& x) const {
    Vec g = Vec::Zero(2);
    for (std::size_t i = 0; i < size(); ++i) g += probs_[i] * gradient(i, x);
    return g;
  }
  [[nodiscard]] Mat expected_hessian(const Vec& x) const {
    Mat h = Mat::Zero(2, 2);
    for (std::size_t i = 0; i < size(); ++i) h += probs_[i] * hessian(i, x);
    return h;
  }

  /// Largest component gradient norm at x; zero at a homogeneous minimizer.
  [[nodiscard]] double max_component_gradient(const Vec& x) const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, gradient(i, x).norm());
    return m;
  }

  /// Reference point by name: "circ" or "quad".
  [[nodiscard]] Vec minimizer(const std::string& which) const {
    if (which == "circ") return circ_min();
    if (which == "quad") return quad_min();
    throw std::invalid_argument("qc model: unknown minimizer '" + which + "'");
  }
  [[nodiscard]] static std::string other_minimizer(const std::string& which) { return which == "circ" ? "quad" : "circ"; }

  nlohmann::json generator;  ///< generator parameters recorded for reproducibility
  std::uint64_t seed = 0;

 private:
  std::string name_;
  std::vector<QcComponent> comps_;
  std::vector<double> probs_;
};

/// Parameters of the seeded QC generator.
struct QcGeneratorConfig {
  std::size_t n_components = 10;
  double q3 = -15.0;
  double quad_sharp_scale = 0.2;    ///< mean q1 of a sharp quadratic basin
  double quad_flat_scale = 0.001;   ///< mean q1 of a flat quadratic basin
  double soft_weight_lo = 0.02, soft_weight_hi = 0.06;  ///< relative q1 of the single soft component
  double stiff_weight_lo = 0.95, stiff_weight_hi = 1.05;
  double c1_lo = 0.5, c1_hi = 1.5;
  double circ_sharp_lo = 0.8, circ_sharp_hi = 1.2;   ///< outer radius c3 of a sharp circular basin
  double circ_flat_lo = 8.0, circ_flat_hi = 12.0;
};

inline nlohmann::json to_json(const QcComponent& c) {
  return {{"q1", c.q1}, {"q2", c.q2}, {"q3", c.q3}, {"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3}, {"c4", c.c4}};
}

inline QcComponent qc_component_from_json(const nlohmann::json& j) {
  QcComponent c;
  c.q1 = j.at("q1").get<double>();
  c.q2 = j.at("q2").get<double>();
  c.q3 = j.at("q3").get<double>();
  c.c1 = j.at("c1").get<double>();
  c.c2 = j.at("c2").get<double>();
  c.c3 = j.at("c3").get<double>();
  c.c4 = j.at("c4").get<double>();
  return c;
}

/// Four models: 1 both basins sharp, 2 circular sharp and quadratic flat,
/// 3 quadratic sharp and circular flat, 4 both flat. Every component shares
/// q2 = 0, q3 = -15, c2 = 0 and c4 = 0, so (0,-15) and (0,0) minimize every
/// component simultaneously.
inline std::array<QcSumsModel, 4> generate_qc_models(std::uint64_t seed, const QcGeneratorConfig& cfg = {}) {
  const std::array<std::pair<bool, bool>, 4> sharpness{{{true, true}, {true, false}, {false, true}, {false, false}}};
  std::vector<QcSumsModel> out;
  const std::size_t n = cfg.n_components;
  if (n < 2) throw std::invalid_argument("qc generator: need at least two components");
  for (std::size_t mi = 0; mi < 4; ++mi) {
    Rng rng(hash_combine(seed, 0x5143u + mi));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    const auto [circ_sharp, quad_sharp] = sharpness[mi];
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = i == 0 ? uni(cfg.soft_weight_lo, cfg.soft_weight_hi) : uni(cfg.stiff_weight_lo, cfg.stiff_weight_hi);
    double mean_w = 0.0;
    for (double v : w) mean_w += v / static_cast<double>(n);
    const double scale = quad_sharp ? cfg.quad_sharp_scale : cfg.quad_flat_scale;
    std::vector<QcComponent> comps(n);
    for (std::size_t i = 0; i < n; ++i) {
      QcComponent& c = comps[i];
      c.q1 = scale * w[i] / mean_w;
      c.q2 = 0.0;
      c.q3 = cfg.q3;
      c.c1 = uni(cfg.c1_lo, cfg.c1_hi);
      c.c2 = 0.0;
      c.c3 = circ_sharp ? uni(cfg.circ_sharp_lo, cfg.circ_sharp_hi) : uni(cfg.circ_flat_lo, cfg.circ_flat_hi);
      c.c4 = 0.0;
    }
    QcSumsModel model("qc" + std::to_string(mi + 1), std::move(comps), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    model.seed = seed;
    model.generator = {{"name", "qc-v1"},
                       {"n_components", n},
                       {"circ_sharp", circ_sharp},
                       {"quad_sharp", quad_sharp},
                       {"quad_scale", scale}};
    for (const Vec& z : {QcSumsModel::circ_min(), QcSumsModel::quad_min()}) {
      if (model.expected_gradient(z).norm() > 1e-8 || model.max_component_gradient(z) > 1e-8)
        throw std::logic_error("qc generator: declared minimizer is not stationary");
    }
    out.push_back(std::move(model));
  }
  return {out[0], out[1], out[2], out[3]};
}

inline nlohmann::json to_json(const QcSumsModel& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components()) comps.push_back(to_json(c));
  return {{"family", "qc"},
          {"name", m.name()},
          {"seed", m.seed},
          {"generator", m.generator},
          {"components", comps},
          {"probs", m.probs()},
          {"box", {{"lo", {-10.0, -20.0}}, {"hi", {10.0, 15.0}}}},
          {"minimizers", {{"circ", {0.0, 0.0}}, {"quad", {0.0, -15.0}}}}};
}

inline QcSumsModel qc_model_from_json(const nlohmann::json& j) {
  if (j.at("family").get<std::string>() != "qc") throw std::invalid_argument("not a qc model");
  std::vector<QcComponent> comps;
  for (const auto& c : j.at("components")) comps.push_back(qc_component_from_json(c));
  QcSumsModel m(j.value("name", std::string("qc")), std::move(comps), j.at("probs").get<std::vector<double>>());
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("generator")) m.generator = j.at("generator");
  return m;
}

}  // namespace sgdk
