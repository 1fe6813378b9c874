#pragma once
/// The SGD-k iteration, trajectory recording, the exact one-step error
/// recursion for quadratics, and log-linear divergence-rate fitting.

#include "sgdk/linalg.hpp"
#include "sgdk/mixture.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/random.hpp"
#include "sgdk/thresholds.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgdk {

/// Step sizes C_N for N >= 1.
struct StepSchedule {
  enum class Kind { constant, harmonic };
  Kind kind = Kind::constant;
  double c0 = 0.0;

  static StepSchedule constant(double c0) { return {Kind::constant, c0}; }
  static StepSchedule harmonic(double c0) { return {Kind::harmonic, c0}; }

  [[nodiscard]] double at(std::size_t n) const {
    if (kind == Kind::constant) return c0;
    if (n == 0) throw std::invalid_argument("harmonic schedule is indexed from 1");
    return c0 / static_cast<double>(n);
  }
  [[nodiscard]] std::string to_string() const {
    return (kind == Kind::constant ? "constant:" : "harmonic:") + format_double(c0);
  }
};

/// Closed axis-aligned box.
struct Box {
  Vec lo;
  Vec hi;

  [[nodiscard]] Vec project(const Vec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
  [[nodiscard]] bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

/// Thrown when a gradient sample has a non-finite component.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// theta - scale * grad_sum, projected onto the box when one is given.
inline Vec apply_step(const Vec& theta, const Vec& grad_sum, double scale, const std::optional<Box>& box) {
  if (!grad_sum.allFinite()) throw NonFiniteGradient("non-finite gradient component");
  Vec next = theta - scale * grad_sum;
  if (box) next = box->project(next);
  return next;
}

/// One SGD-k update: clip(theta - (c/k) sum(grads), box).
inline Vec sgd_k_step(const Vec& theta, std::span<const Vec> grads, double c, const std::optional<Box>& box = std::nullopt) {
  if (grads.empty()) throw std::invalid_argument("sgd_k_step: at least one gradient is required");
  if (!std::isfinite(c)) throw std::invalid_argument("sgd_k_step: step size must be finite");
  Vec sum = Vec::Zero(theta.size());
  for (const Vec& g : grads) {
    if (g.size() != theta.size()) throw std::invalid_argument("sgd_k_step: gradient has wrong length");
    if (!g.allFinite()) throw NonFiniteGradient("sgd_k_step: non-finite gradient component");
    sum += g;
  }
  return apply_step(theta, sum, c / static_cast<double>(grads.size()), box);
}

/// Labels attached to a trajectory.
struct RunFactors {
  std::string model;
  BatchSize k = BatchSize::finite(1);
  StepSchedule schedule;
  double init_radius = 0.0;
  std::string reference;
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
};

/// One SGD-k trajectory.
struct RunRecord {
  RunFactors factors;
  std::vector<Vec> iterates;          ///< empty when iterates are not recorded
  std::vector<double> distances;      ///< to the reference point
  std::vector<double> alt_distances;  ///< to the alternate reference point, if any
  std::vector<double> errors;         ///< (theta - ref)' E (theta - ref) when a metric is attached
  bool failed = false;
  std::string diagnostic;
  std::size_t failed_at = 0;
};

struct RunOptions {
  std::optional<Box> box;
  std::optional<Vec> reference;      ///< distances are measured from here (origin when absent)
  std::optional<Vec> alt_reference;
  std::optional<Mat> error_metric;   ///< E[Q] for e_N
  bool record_iterates = true;
};

/// Runs T iterations of SGD-k from theta0. Batches are drawn i.i.d. with
/// replacement from the mixture weights; k = inf uses the expected gradient.
/// Failures are recorded in the returned record rather than thrown.
template <Mixture F>
RunRecord run(const F& f, const Vec& theta0, const StepSchedule& schedule, BatchSize k, std::size_t steps,
              std::uint64_t seed, const RunOptions& opts = {}, RunFactors factors = {}) {
  if (steps < 1) throw std::invalid_argument("run: at least one iteration is required");
  if (theta0.size() != f.dim()) throw std::invalid_argument("run: initial point has wrong length");
  factors.k = k;
  factors.schedule = schedule;
  factors.seed = seed;
  RunRecord rec;
  rec.factors = std::move(factors);
  const Vec ref = opts.reference ? *opts.reference : Vec::Zero(theta0.size());

  auto observe = [&](const Vec& x) {
    if (opts.record_iterates) rec.iterates.push_back(x);
    const Vec d = x - ref;
    rec.distances.push_back(d.norm());
    if (opts.alt_reference) rec.alt_distances.push_back((x - *opts.alt_reference).norm());
    if (opts.error_metric) rec.errors.push_back(d.dot(*opts.error_metric * d));
  };

  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(f.probs().begin(), f.probs().end());
  Vec theta = theta0;
  Vec acc(theta0.size());
  observe(theta);
  for (std::size_t n = 0; n < steps; ++n) {
    try {
      const double c = schedule.at(n + 1);
      if (!std::isfinite(c)) throw std::invalid_argument("non-finite step size");
      double scale = c;
      if (k.is_infinite()) {
        acc = f.expected_gradient(theta);
      } else {
        acc.setZero();
        const std::uint64_t kk = k.value();
        for (std::uint64_t b = 0; b < kk; ++b) add_component_gradient(f, pick(rng), theta, acc);
        scale = c / static_cast<double>(kk);
      }
      theta = apply_step(theta, acc, scale, opts.box);
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.failed_at = n + 1;
      rec.diagnostic = "iteration " + std::to_string(n + 1) + ": " + e.what();
      break;
    }
    observe(theta);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Exact one-step recursion

struct RecursionTerms {
  double e = 0.0;      ///< d'E[Q]d
  double e2 = 0.0;     ///< d'E[Q]^2 d
  double e3 = 0.0;     ///< d'E[Q]^3 d
  double e_m = 0.0;    ///< d'M d
  double cross = 0.0;  ///< d'E[Q E[Q] z], z = Q theta* + r
  double noise = 0.0;  ///< E[z'E[Q] z]
};

inline RecursionTerms recursion_terms(const StochasticQuadratic& problem, const QuadraticGeometry& geom, const Vec& theta) {
  const Vec d = theta - geom.theta_star;
  RecursionTerms t;
  const Vec qd = geom.eq * d;
  const Vec q2d = geom.eq * qd;
  t.e = d.dot(qd);
  t.e2 = qd.dot(qd);
  t.e3 = qd.dot(q2d);
  t.e_m = d.dot(geom.big_m * d);
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const Vec z = problem.q(i) * geom.theta_star + problem.r(i);
    const Vec eqz = geom.eq * z;
    t.cross += problem.probs()[i] * d.dot(problem.q(i) * eqz);
    t.noise += problem.probs()[i] * z.dot(eqz);
  }
  return t;
}

struct RecursionValues {
  double formula = 0.0;
  double enumeration = 0.0;
};

/// Closed-form E[e_{N+1} | theta_N = theta] against the exact expectation over
/// all ordered batches of size k.
inline RecursionValues recursion_oracle(const StochasticQuadratic& problem, const QuadraticGeometry& geom,
                                        const Vec& theta, double c, std::uint64_t k,
                                        std::uint64_t budget = 1'000'000) {
  if (k == 0) throw std::invalid_argument("recursion_oracle: k must be positive");
  const std::size_t nc = problem.size();
  std::uint64_t count = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    if (count > budget / nc) throw std::invalid_argument("recursion_oracle: enumeration budget exceeded");
    count *= nc;
  }
  const RecursionTerms t = recursion_terms(problem, geom, theta);
  const double ck = c * c / static_cast<double>(k);
  RecursionValues out;
  out.formula = t.e - 2.0 * c * t.e2 + c * c * t.e3 + ck * t.e_m + 2.0 * ck * t.cross + ck * t.noise;

  std::vector<Vec> grads(nc);
  for (std::size_t i = 0; i < nc; ++i) grads[i] = problem.gradient(i, theta);
  std::vector<std::size_t> idx(k, 0);
  const double scale = c / static_cast<double>(k);
  double total = 0.0;
  Vec sum(theta.size());
  for (std::uint64_t n = 0; n < count; ++n) {
    double w = 1.0;
    sum.setZero();
    for (std::size_t b = 0; b < k; ++b) {
      w *= problem.probs()[idx[b]];
      sum += grads[idx[b]];
    }
    const Vec d = theta - scale * sum - geom.theta_star;
    total += w * d.dot(geom.eq * d);
    for (std::size_t b = 0; b < k; ++b) {
      if (++idx[b] < nc) break;
      idx[b] = 0;
    }
  }
  out.enumeration = total;
  return out;
}

// ---------------------------------------------------------------------------
// Rate fitting

/// Inclusive iteration range.
struct FitWindow {
  std::size_t first = 0;
  std::size_t last = 0;
};

struct RateFit {
  double rate = 1.0;  ///< exp(slope of log distance per iteration)
  double r2 = 1.0;    ///< coefficient of determination, 1 when log distance is constant
  double slope = 0.0;
};

/// Iterations 2..T when at least three points remain, otherwise 0..T.
inline FitWindow default_fit_window(std::size_t steps) {
  return steps >= 4 ? FitWindow{2, steps} : FitWindow{0, steps};
}

inline RateFit fit_divergence_rate(std::span<const double> distances, FitWindow w) {
  if (w.last >= distances.size() || w.first > w.last) throw std::invalid_argument("fit_divergence_rate: window out of range");
  const std::size_t n = w.last - w.first + 1;
  if (n < 2) throw std::invalid_argument("fit_divergence_rate: window needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = distances[w.first + i];
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("fit_divergence_rate: window contains a zero or non-finite distance");
    ys[i] = std::log(d);
    mx += static_cast<double>(w.first + i);
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(w.first + i) - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.rate = std::exp(fit.slope);
  const double ss_res = syy - fit.slope * sxy;
  fit.r2 = syy > 0.0 ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  if (syy > 0.0 && ss_res <= 1e-15 * syy) fit.r2 = 1.0;
  return fit;
}

inline RateFit fit_divergence_rate(const RunRecord& rec, std::optional<FitWindow> w = std::nullopt) {
  if (rec.distances.empty()) throw std::invalid_argument("fit_divergence_rate: empty record");
  return fit_divergence_rate(rec.distances, w ? *w : default_fit_window(rec.distances.size() - 1));
}

}  // namespace sgdk
