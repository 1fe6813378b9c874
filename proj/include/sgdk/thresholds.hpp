#pragma once
/// Batch sizes, threshold reports and the eigenvalue-bracket formulas shared by
/// the quadratic and mechanism modules.

#include "sgdk/linalg.hpp"

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sgdk {

/// A positive integer batch size, or infinity (exact expected gradient).
class BatchSize {
 public:
  static BatchSize finite(std::uint64_t k) {
    if (k == 0) throw std::invalid_argument("batch size must be positive");
    return BatchSize(k);
  }
  static BatchSize infinite() { return BatchSize(0); }

  /// Accepts a positive integer, or one of "inf", "infinity", "gd".
  static BatchSize parse(std::string_view text) {
    if (text == "inf" || text == "infinity" || text == "gd" || text == "Inf") return infinite();
    std::uint64_t k = 0;
    if (text.empty()) throw std::invalid_argument("empty batch size");
    for (char ch : text) {
      if (ch < '0' || ch > '9') throw std::invalid_argument("invalid batch size: " + std::string(text));
      k = k * 10 + static_cast<std::uint64_t>(ch - '0');
    }
    return finite(k);
  }

  [[nodiscard]] bool is_infinite() const { return k_ == 0; }
  [[nodiscard]] std::uint64_t value() const {
    if (is_infinite()) throw std::logic_error("infinite batch size has no integer value");
    return k_;
  }
  /// 1/k, with 1/inf = 0.
  [[nodiscard]] double inverse() const { return is_infinite() ? 0.0 : 1.0 / static_cast<double>(k_); }
  [[nodiscard]] double as_double() const {
    return is_infinite() ? std::numeric_limits<double>::infinity() : static_cast<double>(k_);
  }
  [[nodiscard]] std::string to_string() const { return is_infinite() ? "inf" : std::to_string(k_); }

  friend bool operator==(const BatchSize&, const BatchSize&) = default;
  friend std::strong_ordering operator<=>(const BatchSize& a, const BatchSize& b) {
    if (a.is_infinite() || b.is_infinite()) return a.is_infinite() <=> b.is_infinite();
    return a.k_ <=> b.k_;
  }

 private:
  explicit BatchSize(std::uint64_t k) : k_(k) {}
  std::uint64_t k_;  // 0 encodes infinity
};

enum class Regime { homogeneous, inhomogeneous, mechanism };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::homogeneous: return "homogeneous";
    case Regime::inhomogeneous: return "inhomogeneous";
    case Regime::mechanism: return "mechanism";
  }
  return "unknown";
}

/// Step-size thresholds for one batch size.
struct ThresholdReport {
  BatchSize k = BatchSize::finite(1);
  Regime regime = Regime::homogeneous;
  double conv_ub = 0.0;       ///< below this the error contracts
  double div_lb = 0.0;        ///< above this the error grows
  int j_index = 1;            ///< 1-based index of the active eigenvalue for div_lb
  double gamma = 0.0;         ///< inhomogeneous slack parameter, 0 when unused
  std::int64_t k_max_div = 0;
  std::int64_t k_max_conv = 0;
};

namespace detail {

inline void require_lambdas(const Vec& lambdas) {
  if (lambdas.size() == 0) throw std::invalid_argument("threshold: no positive eigenvalues");
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas(i) > 0.0)) throw std::invalid_argument("threshold: eigenvalues must be positive");
    if (i > 0 && lambdas(i) > lambdas(i - 1)) throw std::invalid_argument("threshold: eigenvalues must be descending");
  }
}

/// Convergence bound 2l/(l^2 + t/k) evaluated at l1 when k exceeds t/(l1 lm), else at lm.
inline double homogeneous_conv_ub(const Vec& lambdas, double t, BatchSize k) {
  const double l1 = lambdas(0);
  const double lm = lambdas(lambdas.size() - 1);
  const double ik = k.inverse();
  const bool use_top = k.is_infinite() || k.as_double() > t / (l1 * lm);
  const double l = use_top ? l1 : lm;
  return 2.0 * l / (l * l + t * ik);
}

/// Index j (0-based) of the first bracket l with k <= s / (l_l l_{l+1} + gamma (l_l + l_{l+1})),
/// or m-1 if there is none.
inline Eigen::Index divergence_bracket(const Vec& lambdas, double s, BatchSize k, double gamma) {
  const Eigen::Index m = lambdas.size();
  if (k.is_infinite()) return m - 1;
  const double kd = k.as_double();
  for (Eigen::Index l = 0; l + 1 < m; ++l) {
    const double tau = s / (lambdas(l) * lambdas(l + 1) + gamma * (lambdas(l) + lambdas(l + 1)));
    if (kd <= tau) return l;
  }
  return m - 1;
}

/// Largest integer strictly below s/(l_{m-1} l_m), clamped at zero; zero when m = 1.
inline std::int64_t k_max_div(const Vec& lambdas, double s) {
  const Eigen::Index m = lambdas.size();
  if (m < 2) return 0;
  const double ratio = s / (lambdas(m - 2) * lambdas(m - 1));
  if (!(ratio > 0.0)) return 0;
  if (ratio >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
  const double below = std::ceil(ratio) - 1.0;
  return below > 0.0 ? static_cast<std::int64_t>(below) : 0;
}

/// Nearest integer to t/(l_m l_1).
inline std::int64_t k_max_conv(const Vec& lambdas, double t) {
  const double ratio = t / (lambdas(lambdas.size() - 1) * lambdas(0));
  if (ratio >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
  return std::llround(ratio);
}

/// Thresholds of the homogeneous form for curvature parameters (s, t).
inline ThresholdReport homogeneous_form(const Vec& lambdas, double s, double t, BatchSize k, Regime regime) {
  require_lambdas(lambdas);
  if (s < 0.0 || t < 0.0) throw std::invalid_argument("threshold: curvature parameters must be nonnegative");
  ThresholdReport rep;
  rep.k = k;
  rep.regime = regime;
  rep.conv_ub = homogeneous_conv_ub(lambdas, t, k);
  const Eigen::Index j = divergence_bracket(lambdas, s, k, 0.0);
  const double lj = lambdas(j);
  rep.div_lb = 2.0 * lj / (lj * lj + s * k.inverse());
  rep.j_index = static_cast<int>(j) + 1;
  rep.gamma = 0.0;
  rep.k_max_div = k_max_div(lambdas, s);
  rep.k_max_conv = k_max_conv(lambdas, t);
  return rep;
}

}  // namespace detail
}  // namespace sgdk
