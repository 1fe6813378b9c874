#pragma once
/// Divergence and boundedness verdicts for single trajectories.

#include "sgdk/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace sgdk {

struct DivergenceCriteria {
  double factor = 10.0;         ///< final distance must exceed factor * initial distance
  double min_rate = 1.05;       ///< fitted per-iteration growth must exceed this
  double min_r2 = 0.9;          ///< log-linear fit quality must exceed this
  double escape_radius = 1.0;   ///< the fit stops once the distance reaches max(escape_radius, factor * d_0)
  double onset_factor = 2.0;    ///< the fit starts once the distance reaches onset_factor * d_0
  std::size_t min_fit_points = 5;  ///< the onset start is used only if it leaves this many points
};

struct DivergenceVerdict {
  bool diverged = false;
  bool grew = false;       ///< final > factor * initial
  bool fit_ok = false;     ///< a rate could be fitted
  RateFit fit;
  FitWindow window;
  std::size_t escape_index = 0;
};

/// The fit runs from iteration 2 (0 when fewer than three points would remain)
/// to the first iteration whose distance reaches the escape level, or to T. When
/// the distance first reaches onset_factor * d_0 later than that start and at least
/// min_fit_points remain, the fit starts there instead.
inline DivergenceVerdict classify_divergence(std::span<const double> d, const DivergenceCriteria& c = {}) {
  DivergenceVerdict v;
  if (d.size() < 2) return v;
  const std::size_t steps = d.size() - 1;
  v.grew = std::isfinite(d[steps]) && d[steps] > c.factor * d[0];
  const double level = std::max(c.escape_radius, c.factor * d[0]);
  std::size_t e = steps;
  for (std::size_t n = 1; n <= steps; ++n) {
    if (!(d[n] < level)) {
      e = n;
      break;
    }
  }
  v.escape_index = e;
  v.window = FitWindow{e >= 4 ? std::size_t{2} : std::size_t{0}, e};
  for (std::size_t n = 0; n <= e; ++n) {
    if (d[n] >= c.onset_factor * d[0]) {
      if (n > v.window.first && e + 1 >= n + c.min_fit_points) v.window.first = n;
      break;
    }
  }
  bool usable = v.window.last > v.window.first;
  for (std::size_t n = v.window.first; usable && n <= v.window.last; ++n) usable = d[n] > 0.0 && std::isfinite(d[n]);
  if (usable) {
    v.fit = fit_divergence_rate(d, v.window);
    v.fit_ok = true;
  }
  v.diverged = v.grew && v.fit_ok && v.fit.rate > c.min_rate && v.fit.r2 > c.min_r2;
  return v;
}

/// Largest distance over a trajectory.
inline double max_distance(std::span<const double> d) {
  double m = 0.0;
  for (double x : d) m = std::isfinite(x) ? std::max(m, x) : std::numeric_limits<double>::infinity();
  return m;
}

/// Half-width of the stationary noise band of SGD-k with constant step c near a
/// minimizer: 5 * sqrt((c^2/k) tr Cov / (1 - rho)), rho = max_j [1 - 2 c l_j + c^2 (l_j^2 + t/k)].
/// Zero for k = inf; NaN when rho >= 1.
inline double stability_band(const Vec& lambdas, double t, double noise_trace, double c, BatchSize k) {
  if (k.is_infinite()) return 0.0;
  const double ik = k.inverse();
  double rho = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
    const double l = lambdas(j);
    rho = std::max(rho, 1.0 - 2.0 * c * l + c * c * (l * l + t * ik));
  }
  if (!(rho < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  return 5.0 * std::sqrt(c * c * ik * noise_trace / (1.0 - rho));
}

/// Every distance stays within factor * d_0-radius + band.
inline bool is_bounded(std::span<const double> d, double init_radius, double band, double factor = 10.0) {
  if (d.empty() || !std::isfinite(band)) return false;
  return max_distance(d) <= factor * init_radius + band;
}

}  // namespace sgdk
