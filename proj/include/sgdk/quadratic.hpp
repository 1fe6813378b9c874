#pragma once
/// Discrete stochastic quadratic problems: geometry, curvature parameters and
/// closed-form step-size thresholds.

#include "sgdk/linalg.hpp"
#include "sgdk/thresholds.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgdk {

/// Tolerances used when validating a StochasticQuadratic.
struct QuadraticTolerances {
  double symmetry = 1e-12;
  double psd = 1e-10;
  double range = 1e-10;
  double prob_sum = 1e-12;
};

/// A finite mixture of f_i(x) = x'Q_i x / 2 + r_i'x drawn with probabilities p_i.
class StochasticQuadratic {
 public:
  static StochasticQuadratic create(std::vector<Mat> qs, std::vector<Vec> rs, std::vector<double> probs,
                                    const QuadraticTolerances& tol = {}) {
    if (qs.empty()) throw std::invalid_argument("quadratic: no components");
    if (qs.size() != rs.size() || qs.size() != probs.size())
      throw std::invalid_argument("quadratic: components, offsets and probabilities differ in length");
    const Eigen::Index p = qs.front().rows();
    if (p == 0) throw std::invalid_argument("quadratic: zero dimension");
    double total = 0.0;
    bool any_nonzero = false;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const Mat& q = qs[i];
      const std::string tag = "quadratic: component " + std::to_string(i) + ": ";
      if (q.rows() != p || q.cols() != p) throw std::invalid_argument(tag + "Q has wrong shape");
      if (rs[i].size() != p) throw std::invalid_argument(tag + "r has wrong length");
      if (!q.allFinite() || !rs[i].allFinite()) throw std::invalid_argument(tag + "non-finite entries");
      if (max_asymmetry(q) > tol.symmetry) throw std::invalid_argument(tag + "Q is not symmetric");
      const SymEigen e = sym_eigen_desc(0.5 * (q + q.transpose()));
      const double top = e.values(0);
      if (e.values(p - 1) < -tol.psd * (1.0 + std::max(top, 0.0)))
        throw std::invalid_argument(tag + "Q is not positive semidefinite");
      const Mat proj = q * pinv_sym(q);
      const double miss = (rs[i] - proj * rs[i]).norm();
      if (miss > tol.range * (1.0 + rs[i].norm())) throw std::invalid_argument(tag + "r is not in the range of Q");
      if (!(probs[i] > 0.0) || !std::isfinite(probs[i])) throw std::invalid_argument(tag + "probability must be positive");
      total += probs[i];
      if (q.cwiseAbs().maxCoeff() > 0.0) any_nonzero = true;
    }
    if (std::abs(total - 1.0) > tol.prob_sum) throw std::invalid_argument("quadratic: probabilities must sum to 1");
    if (!any_nonzero) throw std::invalid_argument("quadratic: every Q is zero");
    StochasticQuadratic out;
    for (auto& q : qs) q = 0.5 * (q + q.transpose());
    out.qs_ = std::move(qs);
    out.rs_ = std::move(rs);
    out.probs_ = std::move(probs);
    return out;
  }

  /// Equiprobable components.
  static StochasticQuadratic uniform(std::vector<Mat> qs, std::vector<Vec> rs) {
    std::vector<double> probs(qs.size(), 1.0 / static_cast<double>(qs.size()));
    return create(std::move(qs), std::move(rs), std::move(probs));
  }

  [[nodiscard]] std::size_t size() const { return qs_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return qs_.front().rows(); }
  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] const Mat& q(std::size_t i) const { return qs_.at(i); }
  [[nodiscard]] const Vec& r(std::size_t i) const { return rs_.at(i); }

  [[nodiscard]] double value(std::size_t i, const Vec& x) const { return 0.5 * x.dot(qs_[i] * x) + rs_[i].dot(x); }
  [[nodiscard]] Vec gradient(std::size_t i, const Vec& x) const { return qs_[i] * x + rs_[i]; }
  void accumulate_gradient(std::size_t i, const Vec& x, Vec& acc) const { acc.noalias() += qs_[i] * x; acc += rs_[i]; }
  [[nodiscard]] Mat hessian(std::size_t i, const Vec&) const { return qs_[i]; }

  [[nodiscard]] Mat expected_q() const {
    Mat eq = Mat::Zero(dim(), dim());
    for (std::size_t i = 0; i < size(); ++i) eq += probs_[i] * qs_[i];
    return eq;
  }
  [[nodiscard]] Vec expected_r() const {
    Vec er = Vec::Zero(dim());
    for (std::size_t i = 0; i < size(); ++i) er += probs_[i] * rs_[i];
    return er;
  }
  [[nodiscard]] double expected_value(const Vec& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < size(); ++i) v += probs_[i] * value(i, x);
    return v;
  }
  [[nodiscard]] Vec expected_gradient(const Vec& x) const { return expected_q() * x + expected_r(); }
  [[nodiscard]] Mat expected_hessian(const Vec&) const { return expected_q(); }

 private:
  StochasticQuadratic() = default;
  std::vector<Mat> qs_;
  std::vector<Vec> rs_;
  std::vector<double> probs_;
};

/// Expected curvature and higher-order curvature parameters of a stochastic quadratic.
struct QuadraticGeometry {
  Mat eq;            ///< E[Q]
  Vec er;            ///< E[r]
  Vec theta_star;    ///< minimum-norm minimizer -E[Q]^+ E[r]
  Eigen::Index m = 0;
  Vec lambdas;       ///< nonzero eigenvalues of E[Q], descending
  Mat range_basis;   ///< eigenvectors paired with lambdas
  Mat big_m;         ///< E[Q E[Q] Q] - E[Q]^3
  double t_q = 0.0;
  double s_q = 0.0;
  double b_min = 0.0;  ///< smallest eigenvalue of the whitened matrix before clamping
  double b_max = 0.0;  ///< largest eigenvalue of the whitened matrix before clamping
  bool homogeneous = false;
  double rank_tol = kDefaultRankTol;
};

/// (t_q, s_q) from the whitened eigenproblem on range(E[Q]); also returns the raw extremes.
struct CurvatureParams {
  double t_q = 0.0;
  double s_q = 0.0;
  double b_min = 0.0;
  double b_max = 0.0;
};

inline CurvatureParams curvature_params(const QuadraticGeometry& geom) {
  PositiveRange range;
  range.basis = geom.range_basis;
  range.lambdas = geom.lambdas;
  const auto [lo, hi] = whitened_extremes(geom.big_m, range);
  return {std::max(hi, 0.0), std::max(lo, 0.0), lo, hi};
}

inline QuadraticGeometry expected_geometry(const StochasticQuadratic& problem, double rank_tol = kDefaultRankTol) {
  QuadraticGeometry g;
  g.rank_tol = rank_tol;
  g.eq = problem.expected_q();
  g.er = problem.expected_r();
  const PositiveRange range = positive_range(g.eq, rank_tol);
  if (range.rank() == 0) throw std::invalid_argument("expected_geometry: E[Q] has no nonzero eigenvalue");
  g.m = range.rank();
  g.lambdas = range.lambdas;
  g.range_basis = range.basis;
  const Mat pinv = range.basis * range.lambdas.cwiseInverse().asDiagonal() * range.basis.transpose();
  g.theta_star = -pinv * g.er;
  Mat second = Mat::Zero(problem.dim(), problem.dim());
  for (std::size_t i = 0; i < problem.size(); ++i) second += problem.probs()[i] * problem.q(i) * g.eq * problem.q(i);
  g.big_m = second - g.eq * g.eq * g.eq;
  g.big_m = 0.5 * (g.big_m + g.big_m.transpose());
  const CurvatureParams cp = curvature_params(g);
  g.t_q = cp.t_q;
  g.s_q = cp.s_q;
  g.b_min = cp.b_min;
  g.b_max = cp.b_max;
  g.homogeneous = true;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const double resid = (problem.q(i) * g.theta_star + problem.r(i)).norm();
    if (resid > 1e-8 * (1.0 + problem.r(i).norm())) {
      g.homogeneous = false;
      break;
    }
  }
  return g;
}

/// Thresholds for a homogeneous minimizer.
inline ThresholdReport homogeneous_thresholds(const QuadraticGeometry& geom, BatchSize k) {
  return detail::homogeneous_form(geom.lambdas, geom.s_q, geom.t_q, k, Regime::homogeneous);
}

/// Thresholds for an inhomogeneous minimizer. gamma defaults to sqrt(s_q/k)/2 and is 0 for k = inf.
inline ThresholdReport inhomogeneous_thresholds(const QuadraticGeometry& geom, BatchSize k,
                                                std::optional<double> gamma = std::nullopt) {
  detail::require_lambdas(geom.lambdas);
  const double s = geom.s_q;
  const double t = geom.t_q;
  if (!(s > 0.0)) throw std::invalid_argument("inhomogeneous_thresholds: s_q must be positive");
  const double ik = k.inverse();
  double g = 0.0;
  if (k.is_infinite()) {
    if (gamma && *gamma != 0.0) throw std::invalid_argument("inhomogeneous_thresholds: gamma must be 0 for k = inf");
  } else {
    g = gamma ? *gamma : 0.5 * std::sqrt(s * ik);
    const double four_g2 = 4.0 * g * g;
    if (!(four_g2 > 0.0) || four_g2 > s * ik * (1.0 + 1e-12))
      throw std::invalid_argument("inhomogeneous_thresholds: 4 gamma^2 must lie in (0, s_q/k]");
  }
  const Vec& lam = geom.lambdas;
  const double l1 = lam(0);
  const double lm = lam(lam.size() - 1);
  ThresholdReport rep;
  rep.k = k;
  rep.regime = Regime::inhomogeneous;
  const bool use_top = k.is_infinite() || k.as_double() + 1.0 > t / (l1 * lm);
  const double lc = use_top ? l1 : lm;
  rep.conv_ub = 2.0 * lc / ((1.0 + ik) * lc * lc + t * ik);
  const Eigen::Index j = detail::divergence_bracket(lam, s, k, g);
  const double lj = lam(j);
  rep.div_lb = 2.0 * (lj + g) / (lj * lj + s * ik);
  rep.j_index = static_cast<int>(j) + 1;
  rep.gamma = g;
  rep.k_max_div = detail::k_max_div(lam, s);
  rep.k_max_conv = detail::k_max_conv(lam, t);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json matrix_to_json(const Mat& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vec vector_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

/// Accepts either nested rows or a flat row-major array of length p*p.
inline Mat matrix_from_json(const nlohmann::json& j, Eigen::Index p) {
  Mat a(p, p);
  if (j.size() == static_cast<std::size_t>(p * p) && (j.empty() || j[0].is_number())) {
    for (Eigen::Index i = 0; i < p * p; ++i) a(i / p, i % p) = j[static_cast<std::size_t>(i)].get<double>();
    return a;
  }
  if (j.size() != static_cast<std::size_t>(p)) throw std::invalid_argument("matrix has wrong number of rows");
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (row.size() != static_cast<std::size_t>(p)) throw std::invalid_argument("matrix row has wrong length");
    for (Eigen::Index c = 0; c < p; ++c) a(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return a;
}

inline nlohmann::json to_json(const StochasticQuadratic& q) {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t i = 0; i < q.size(); ++i)
    comps.push_back({{"Q", matrix_to_json(q.q(i))}, {"r", vector_to_json(q.r(i))}, {"p", q.probs()[i]}});
  return {{"dim", q.dim()}, {"components", comps}};
}

inline StochasticQuadratic quadratic_from_json(const nlohmann::json& j) {
  const auto p = j.at("dim").get<Eigen::Index>();
  std::vector<Mat> qs;
  std::vector<Vec> rs;
  std::vector<double> ps;
  for (const auto& c : j.at("components")) {
    qs.push_back(matrix_from_json(c.at("Q"), p));
    rs.push_back(c.contains("r") ? vector_from_json(c.at("r")) : Vec::Zero(p));
    ps.push_back(c.at("p").get<double>());
  }
  return StochasticQuadratic::create(std::move(qs), std::move(rs), std::move(ps));
}

inline nlohmann::json to_json(const ThresholdReport& r) {
  return {{"k", r.k.to_string()},   {"regime", to_string(r.regime)}, {"conv_ub", r.conv_ub},
          {"div_lb", r.div_lb},     {"j", r.j_index},                {"gamma", r.gamma},
          {"kmax_div", r.k_max_div}, {"kmax_conv", r.k_max_conv}};
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline const char* threshold_csv_header() { return "model,k,regime,conv_ub,div_lb,j,gamma,kmax_div,kmax_conv"; }

inline std::string threshold_csv_row(const std::string& model, const ThresholdReport& r) {
  std::ostringstream os;
  os << model << ',' << r.k.to_string() << ',' << to_string(r.regime) << ',' << format_double(r.conv_ub) << ','
     << format_double(r.div_lb) << ',' << r.j_index << ',' << format_double(r.gamma) << ',' << r.k_max_div << ','
     << r.k_max_conv;
  return os.str();
}

}  // namespace sgdk
