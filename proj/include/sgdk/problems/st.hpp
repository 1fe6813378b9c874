#pragma once
/// Styblinski-Tang sums: separable quartic mixtures with a catalog of the 2^p
/// local minimizers of the expected objective.

#include "sgdk/linalg.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/random.hpp"
#include "sgdk/sgd.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgdk {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One component: per-coordinate coefficients (c1, c2, c3) of
/// f(x) = 1/2 sum_j (c1 x_j^4 + c2 x_j^2 + c3 x_j).
struct StComponent {
  Vec c1, c2, c3;

  void validate() const {
    if (c1.size() == 0 || c2.size() != c1.size() || c3.size() != c1.size())
      throw std::invalid_argument("st component: coefficient vectors differ in length");
    for (Eigen::Index j = 0; j < c1.size(); ++j) {
      if (!(c1(j) > 0.0)) throw std::invalid_argument("st component: c1 must be positive");
      if (!(c2(j) <= 0.0)) throw std::invalid_argument("st component: c2 must be nonpositive");
      if (!(c3(j) >= 0.0)) throw std::invalid_argument("st component: c3 must be nonnegative");
    }
  }

  [[nodiscard]] double value(const Vec& x) const {
    const Eigen::ArrayXd a = x.array();
    return 0.5 * (c1.array() * a.pow(4) + c2.array() * a.square() + c3.array() * a).sum();
  }
  [[nodiscard]] Vec gradient(const Vec& x) const {
    const Eigen::ArrayXd a = x.array();
    return (2.0 * c1.array() * a.cube() + c2.array() * a + 0.5 * c3.array()).matrix();
  }
  [[nodiscard]] Vec hessian_diagonal(const Vec& x) const {
    return (6.0 * c1.array() * x.array().square() + c2.array()).matrix();
  }
  [[nodiscard]] Mat hessian(const Vec& x) const { return hessian_diagonal(x).asDiagonal(); }
};

/// Per-coordinate outer roots of the expected cubic and the extreme minimizers.
struct StCatalog {
  Vec lo, hi;            ///< negative-side and positive-side minimizing roots per coordinate
  Vec curv_lo, curv_hi;  ///< expected curvature at each root
  Vec flattest, sharpest;

  [[nodiscard]] Eigen::Index dim() const { return lo.size(); }
  /// Number of cataloged minimizers, 2^p.
  [[nodiscard]] double count() const { return std::ldexp(1.0, static_cast<int>(dim())); }
  /// The minimizer selecting hi where choose_hi is true.
  [[nodiscard]] Vec minimizer(const std::vector<bool>& choose_hi) const {
    if (choose_hi.size() != static_cast<std::size_t>(dim())) throw std::invalid_argument("st catalog: bad selector length");
    Vec x(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) x(j) = choose_hi[static_cast<std::size_t>(j)] ? hi(j) : lo(j);
    return x;
  }
  [[nodiscard]] Vec curvature(const std::vector<bool>& choose_hi) const {
    Vec c(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) c(j) = choose_hi[static_cast<std::size_t>(j)] ? curv_hi(j) : curv_lo(j);
    return c;
  }
};

/// Real roots of 2a x^3 + b x + c/2 = 0, ascending, when there are three distinct ones.
inline std::array<double, 3> st_cubic_roots(double a, double b, double c) {
  if (!(a > 0.0)) throw std::invalid_argument("st cubic: leading coefficient must be positive");
  const double p = b / (2.0 * a);
  const double q = c / (4.0 * a);
  const double disc = 4.0 * p * p * p + 27.0 * q * q;
  if (!(p < 0.0) || !(disc < 0.0)) throw std::invalid_argument("st cubic: fewer than three distinct real roots");
  const double amp = 2.0 * std::sqrt(-p / 3.0);
  const double arg = std::clamp((3.0 * q / (2.0 * p)) * std::sqrt(-3.0 / p), -1.0, 1.0);
  const double phi = std::acos(arg) / 3.0;
  std::array<double, 3> r{};
  for (int k = 0; k < 3; ++k) {
    double x = amp * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
    for (int it = 0; it < 3; ++it) {
      const double f = x * x * x + p * x + q;
      const double df = 3.0 * x * x + p;
      if (df == 0.0) break;
      x -= f / df;
    }
    r[static_cast<std::size_t>(k)] = x;
  }
  std::sort(r.begin(), r.end());
  return r;
}

/// A weighted mixture of ST components on the box (-5,5)^p.
class StSumsModel {
 public:
  StSumsModel(std::string name, RowMat c1, RowMat c2, RowMat c3, std::vector<double> probs)
      : name_(std::move(name)), c1_(std::move(c1)), c2_(std::move(c2)), c3_(std::move(c3)), probs_(std::move(probs)) {
    const auto n = static_cast<Eigen::Index>(probs_.size());
    if (n == 0 || c1_.rows() != n || c2_.rows() != n || c3_.rows() != n || c1_.cols() != c2_.cols() ||
        c1_.cols() != c3_.cols() || c1_.cols() == 0)
      throw std::invalid_argument("st model: coefficient shapes disagree");
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      component(static_cast<std::size_t>(i)).validate();
      if (!(probs_[static_cast<std::size_t>(i)] > 0.0)) throw std::invalid_argument("st model: probabilities must be positive");
      total += probs_[static_cast<std::size_t>(i)];
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("st model: probabilities must sum to 1");
    const Eigen::Map<const Vec> w(probs_.data(), n);
    m1_ = c1_.transpose() * w;
    m2_ = c2_.transpose() * w;
    m3_ = c3_.transpose() * w;
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return c1_.cols(); }
  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] const RowMat& c1() const { return c1_; }
  [[nodiscard]] const RowMat& c2() const { return c2_; }
  [[nodiscard]] const RowMat& c3() const { return c3_; }
  [[nodiscard]] StComponent component(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {c1_.row(r).transpose(), c2_.row(r).transpose(), c3_.row(r).transpose()};
  }
  /// Probability-weighted coefficients.
  [[nodiscard]] StComponent expected() const { return {m1_, m2_, m3_}; }

  [[nodiscard]] double value(std::size_t i, const Vec& x) const { return component(i).value(x); }
  [[nodiscard]] Vec gradient(std::size_t i, const Vec& x) const {
    Vec g = Vec::Zero(dim());
    accumulate_gradient(i, x, g);
    return g;
  }
  void accumulate_gradient(std::size_t i, const Vec& x, Vec& acc) const {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::ArrayXd a = x.array();
    acc.array() += 2.0 * c1_.row(r).transpose().array() * a.cube() + c2_.row(r).transpose().array() * a +
                   0.5 * c3_.row(r).transpose().array();
  }
  [[nodiscard]] Vec hessian_diagonal(std::size_t i, const Vec& x) const {
    const auto r = static_cast<Eigen::Index>(i);
    return (6.0 * c1_.row(r).transpose().array() * x.array().square() + c2_.row(r).transpose().array()).matrix();
  }
  [[nodiscard]] Mat hessian(std::size_t i, const Vec& x) const { return hessian_diagonal(i, x).asDiagonal(); }

  [[nodiscard]] double expected_value(const Vec& x) const { return expected().value(x); }
  [[nodiscard]] Vec expected_gradient(const Vec& x) const { return expected().gradient(x); }
  [[nodiscard]] Vec expected_hessian_diagonal(const Vec& x) const { return expected().hessian_diagonal(x); }
  [[nodiscard]] Mat expected_hessian(const Vec& x) const { return expected_hessian_diagonal(x).asDiagonal(); }

  [[nodiscard]] double max_component_gradient(const Vec& x) const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, gradient(i, x).norm());
    return m;
  }

  [[nodiscard]] static Box box(Eigen::Index p) { return {Vec::Constant(p, -5.0), Vec::Constant(p, 5.0)}; }
  [[nodiscard]] Box box() const { return box(dim()); }

  /// Outer roots of 2 c1 x^3 + c2 x + c3/2 = 0 for the expected coefficients.
  [[nodiscard]] StCatalog minimizers() const {
    const Eigen::Index p = dim();
    StCatalog cat;
    cat.lo.resize(p);
    cat.hi.resize(p);
    cat.curv_lo.resize(p);
    cat.curv_hi.resize(p);
    cat.flattest.resize(p);
    cat.sharpest.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto roots = st_cubic_roots(m1_(j), m2_(j), m3_(j));
      cat.lo(j) = roots[0];
      cat.hi(j) = roots[2];
      cat.curv_lo(j) = 6.0 * m1_(j) * roots[0] * roots[0] + m2_(j);
      cat.curv_hi(j) = 6.0 * m1_(j) * roots[2] * roots[2] + m2_(j);
      if (!(cat.curv_lo(j) > 0.0) || !(cat.curv_hi(j) > 0.0) || !(roots[0] < roots[2]))
        throw std::invalid_argument("st minimizers: coordinate " + std::to_string(j) + " lacks two distinct minima");
      const double a = cat.curv_lo(j);
      const double b = cat.curv_hi(j);
      const bool tie = std::abs(a - b) <= 1e-12 * std::max(a, b);
      cat.flattest(j) = (tie || a < b) ? cat.lo(j) : cat.hi(j);
      cat.sharpest(j) = (tie || a > b) ? cat.lo(j) : cat.hi(j);
    }
    return cat;
  }

  /// Reference point by name: "flattest" or "sharpest".
  [[nodiscard]] Vec minimizer(const std::string& which) const {
    const StCatalog cat = minimizers();
    if (which == "flattest" || which == "flat") return cat.flattest;
    if (which == "sharpest" || which == "sharp") return cat.sharpest;
    throw std::invalid_argument("st model: unknown minimizer '" + which + "'");
  }
  [[nodiscard]] static std::string other_minimizer(const std::string& which) {
    return (which == "flattest" || which == "flat") ? "sharpest" : "flattest";
  }

  nlohmann::json generator;
  std::uint64_t seed = 0;

 private:
  std::string name_;
  RowMat c1_, c2_, c3_;
  std::vector<double> probs_;
  Vec m1_, m2_, m3_;
};

/// Parameters of the seeded ST generator. Each component scales a per-coordinate
/// base coefficient triple by a common positive factor and perturbs c3.
struct StGeneratorConfig {
  double base_c1_lo = 0.8, base_c1_hi = 1.2;
  double base_c2_lo = -18.0, base_c2_hi = -12.0;
  double base_c3_lo = 0.5, base_c3_hi = 8.0;
  double scale_spread = 0.3;  ///< component factors uniform in [1 - spread, 1 + spread]
  double c3_jitter = 0.01;
  int max_retries = 16;
};

/// The three model sizes: (p, N) = (10, 200), (50, 1000), (100, 2000).
inline constexpr std::array<std::pair<Eigen::Index, Eigen::Index>, 3> kStModelSizes{{{10, 200}, {50, 1000}, {100, 2000}}};

inline StSumsModel generate_st_model(std::uint64_t seed, std::size_t index, const StGeneratorConfig& cfg = {}) {
  const auto [p, n] = kStModelSizes.at(index);
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    Rng rng(hash_combine(hash_combine(seed, 0x5354u + index), static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    Vec b1(p), b2(p), b3(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      b1(j) = uni(cfg.base_c1_lo, cfg.base_c1_hi);
      b2(j) = uni(cfg.base_c2_lo, cfg.base_c2_hi);
      b3(j) = uni(cfg.base_c3_lo, cfg.base_c3_hi);
    }
    RowMat c1(n, p), c2(n, p), c3(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double a = uni(1.0 - cfg.scale_spread, 1.0 + cfg.scale_spread);
        c1(i, j) = a * b1(j);
        c2(i, j) = a * b2(j);
        c3(i, j) = std::max(0.0, a * b3(j) + uni(-cfg.c3_jitter, cfg.c3_jitter));
      }
    }
    try {
      StSumsModel model("st" + std::to_string(index + 1), std::move(c1), std::move(c2), std::move(c3),
                        std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)));
      const StCatalog cat = model.minimizers();
      if ((cat.lo.array() <= -5.0).any() || (cat.hi.array() >= 5.0).any()) continue;
      if (model.max_component_gradient(cat.flattest) <= 1e-3 || model.max_component_gradient(cat.sharpest) <= 1e-3)
        continue;
      model.seed = seed;
      model.generator = {{"name", "st-v1"},
                         {"attempt", attempt},
                         {"scale_spread", cfg.scale_spread},
                         {"c3_jitter", cfg.c3_jitter}};
      return model;
    } catch (const std::invalid_argument&) {
      continue;
    }
  }
  throw std::runtime_error("st generator: retries exhausted");
}

inline std::array<StSumsModel, 3> generate_st_models(std::uint64_t seed, const StGeneratorConfig& cfg = {}) {
  return {generate_st_model(seed, 0, cfg), generate_st_model(seed, 1, cfg), generate_st_model(seed, 2, cfg)};
}

inline nlohmann::json to_json(const StSumsModel& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const StComponent c = m.component(i);
    comps.push_back({{"c1", vector_to_json(c.c1)}, {"c2", vector_to_json(c.c2)}, {"c3", vector_to_json(c.c3)}});
  }
  const StCatalog cat = m.minimizers();
  return {{"family", "st"},
          {"name", m.name()},
          {"seed", m.seed},
          {"dim", m.dim()},
          {"generator", m.generator},
          {"components", comps},
          {"probs", m.probs()},
          {"box", {{"lo", -5.0}, {"hi", 5.0}}},
          {"minimizers",
           {{"flattest", vector_to_json(cat.flattest)},
            {"sharpest", vector_to_json(cat.sharpest)},
            {"roots_lo", vector_to_json(cat.lo)},
            {"roots_hi", vector_to_json(cat.hi)},
            {"count", cat.count()}}}};
}

inline StSumsModel st_model_from_json(const nlohmann::json& j) {
  if (j.at("family").get<std::string>() != "st") throw std::invalid_argument("not an st model");
  const auto& comps = j.at("components");
  const auto n = static_cast<Eigen::Index>(comps.size());
  if (n == 0) throw std::invalid_argument("st model: no components");
  const auto p = static_cast<Eigen::Index>(comps[0].at("c1").size());
  RowMat c1(n, p), c2(n, p), c3(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = comps[static_cast<std::size_t>(i)];
    c1.row(i) = vector_from_json(c.at("c1")).transpose();
    c2.row(i) = vector_from_json(c.at("c2")).transpose();
    c3.row(i) = vector_from_json(c.at("c3")).transpose();
  }
  StSumsModel m(j.value("name", std::string("st")), std::move(c1), std::move(c2), std::move(c3),
                j.at("probs").get<std::vector<double>>());
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("generator")) m.generator = j.at("generator");
  return m;
}

}  // namespace sgdk
