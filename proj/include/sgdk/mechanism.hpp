#pragma once
/// Ball-averaged local Hessian geometry of a nonconvex mixture around a
/// candidate minimizer, and the resulting SGD-k thresholds.

#include "sgdk/linalg.hpp"
#include "sgdk/mixture.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/random.hpp"
#include "sgdk/thresholds.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sgdk {

inline constexpr double kDefaultEpsilon = 2e-2;
inline constexpr std::size_t kDefaultSamples = 1000;

struct LocalGeometry {
  Vec center;
  double epsilon = kDefaultEpsilon;
  std::size_t n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  Mat avg_hessian;
  Vec lambdas;             ///< positive eigenvalues of avg_hessian, descending
  double s_f = 0.0;
  double t_f = 0.0;
  std::size_t flat_spots = 0;   ///< samples where the expected Hessian has no positive eigenvalue
  int n_negative = 0;           ///< negative eigenvalues of avg_hessian excluded from lambdas
  [[nodiscard]] Eigen::Index m() const { return lambdas.size(); }
};

/// n points uniform in the closed ball of radius epsilon about center.
inline std::vector<Vec> sample_ball(const Vec& center, double epsilon, std::size_t n, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("sample_ball: epsilon must be positive");
  if (n < 1) throw std::invalid_argument("sample_ball: n must be at least 1");
  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(uniform_in_ball(center, epsilon, rng));
  return out;
}

namespace detail {

struct SampleCurvature {
  Mat expected_hessian;
  bool flat = false;
  double lo = 0.0;
  double hi = 0.0;
};

template <HessianMixture F>
SampleCurvature dense_sample_curvature(const F& f, const Vec& x, double rank_tol) {
  const Eigen::Index p = f.dim();
  std::vector<Mat> hs(f.size());
  Mat hf = Mat::Zero(p, p);
  for (std::size_t i = 0; i < f.size(); ++i) {
    hs[i] = f.hessian(i, x);
    hf += f.probs()[i] * hs[i];
  }
  hf = 0.5 * (hf + hf.transpose());
  SampleCurvature out;
  out.expected_hessian = hf;
  const PositiveRange range = positive_range(hf, rank_tol);
  if (range.rank() == 0) {
    out.flat = true;
    return out;
  }
  Mat m = -hf * hf * hf;
  for (std::size_t i = 0; i < f.size(); ++i) m += f.probs()[i] * hs[i] * hf * hs[i];
  m = 0.5 * (m + m.transpose());
  std::tie(out.lo, out.hi) = whitened_extremes(m, range);
  return out;
}

/// With diagonal component Hessians d_i, M is diagonal with entries D_j Var_j(d),
/// so the whitened matrix is diag(Var_j(d)) on the positive coordinates of D.
template <DiagonalHessianMixture F>
SampleCurvature diagonal_sample_curvature(const F& f, const Vec& x, double rank_tol) {
  const Eigen::Index p = f.dim();
  Vec mean = Vec::Zero(p);
  Vec second = Vec::Zero(p);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec d = f.hessian_diagonal(i, x);
    const double w = f.probs()[i];
    mean += w * d;
    second += w * d.cwiseProduct(d);
  }
  SampleCurvature out;
  out.expected_hessian = mean.asDiagonal();
  const double top = mean.maxCoeff();
  if (!(top > 0.0)) {
    out.flat = true;
    return out;
  }
  bool first = true;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (mean(j) <= rank_tol * top) continue;
    const double var = second(j) - mean(j) * mean(j);
    if (first) {
      out.lo = out.hi = var;
      first = false;
    } else {
      out.lo = std::min(out.lo, var);
      out.hi = std::max(out.hi, var);
    }
  }
  return out;
}

}  // namespace detail

/// Monte-Carlo estimate of the ball-averaged Hessian, its positive spectrum,
/// and the curvature parameters s_f (mean of per-sample whitened minima,
/// clamped at 0) and t_f (mean of per-sample whitened maxima, clamped at 0).
template <Mixture F>
  requires HessianMixture<F> || DiagonalHessianMixture<F>
LocalGeometry local_geometry(const F& f, const Vec& center, double epsilon = kDefaultEpsilon,
                             std::size_t n_samples = kDefaultSamples, std::uint64_t seed = 0,
                             double rank_tol = kDefaultRankTol) {
  if (center.size() != f.dim()) throw std::invalid_argument("local_geometry: center has wrong length");
  const std::vector<Vec> pts = sample_ball(center, epsilon, n_samples, seed);
  LocalGeometry g;
  g.center = center;
  g.epsilon = epsilon;
  g.n_samples = n_samples;
  g.seed = seed;
  g.avg_hessian = Mat::Zero(f.dim(), f.dim());
  double sum_lo = 0.0;
  double sum_hi = 0.0;
  for (const Vec& x : pts) {
    detail::SampleCurvature sc;
    if constexpr (DiagonalHessianMixture<F>) {
      sc = detail::diagonal_sample_curvature(f, x, rank_tol);
    } else {
      sc = detail::dense_sample_curvature(f, x, rank_tol);
    }
    g.avg_hessian += sc.expected_hessian;
    if (sc.flat) {
      ++g.flat_spots;
      continue;
    }
    sum_lo += sc.lo;
    sum_hi += sc.hi;
  }
  const double n = static_cast<double>(n_samples);
  g.avg_hessian /= n;
  g.avg_hessian = 0.5 * (g.avg_hessian + g.avg_hessian.transpose());
  g.s_f = std::max(0.0, sum_lo / n);
  g.t_f = std::max(0.0, sum_hi / n);
  const PositiveRange range = positive_range(g.avg_hessian, rank_tol);
  g.lambdas = range.lambdas;
  g.n_negative = range.n_negative;
  return g;
}

/// Divergence bound with s_f and the bracket rule; convergence bound of the
/// homogeneous form with t_f.
inline ThresholdReport mechanism_thresholds(const LocalGeometry& geom, BatchSize k) {
  if (geom.m() == 0) throw std::invalid_argument("mechanism_thresholds: no positive eigenvalue in the local geometry");
  return detail::homogeneous_form(geom.lambdas, geom.s_f, geom.t_f, k, Regime::mechanism);
}

inline nlohmann::json to_json(const LocalGeometry& g) {
  return {{"center", vector_to_json(g.center)}, {"epsilon", g.epsilon},   {"n", g.n_samples},
          {"seed", g.seed},                     {"lambdas", vector_to_json(g.lambdas)},
          {"s_f", g.s_f},                       {"t_f", g.t_f},           {"flat_spots", g.flat_spots},
          {"n_negative", g.n_negative}};
}

}  // namespace sgdk
