#pragma once
/// The acceptance suite: ten numbered criteria with pinned tolerances, shared
/// by the acceptance test binary and the command-line `verify` subcommand.

#include "sgdk/experiments/classify.hpp"
#include "sgdk/experiments/models.hpp"
#include "sgdk/experiments/plan.hpp"
#include "sgdk/experiments/runner.hpp"
#include "sgdk/experiments/tables.hpp"
#include "sgdk/mechanism.hpp"
#include "sgdk/problems/qc.hpp"
#include "sgdk/problems/st.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/random.hpp"
#include "sgdk/sgd.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sgdk::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::vector<std::string> details;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t qc_model_seed = 1;
  std::uint64_t st_model_seed = 1;
  std::uint64_t master_seed = 20240501;
  std::set<int> only;  ///< empty runs every criterion
};

// Pinned tolerances and budgets.
inline constexpr double kC1RuntimeSec = 1.0;
inline constexpr double kC2IterateTol = 1e-12;
inline constexpr double kC2RateTol = 1e-9;
inline constexpr double kC3Tol = 1e-12;
inline constexpr double kC3RuntimeSec = 10.0;
inline constexpr double kC4Sigmas = 3.0;
inline constexpr double kC5JensenTol = 1e-9;
inline constexpr double kC5PositivityTol = 1e-9;  ///< relative to lambda_1^2
inline constexpr double kC6RelTol = 0.01;
inline constexpr double kC7FdRelTol = 1e-5;
inline constexpr double kC7FdStep = 1e-5;
inline constexpr double kC7C2Tol = 1e-4;
inline constexpr double kC9RuntimeSec = 300.0;
inline constexpr double kC9StDivergeMaxRadius = 0.1;

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Mat random_orthogonal(Eigen::Index p, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat a(p, p);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ();
}

/// Random PSD matrix of rank r with nonzero eigenvalues in [0.2, 2] and a random eigenbasis.
inline Mat random_psd(Eigen::Index p, Eigen::Index r, Rng& rng) {
  const Mat u = random_orthogonal(p, rng);
  Vec lam = Vec::Zero(p);
  for (Eigen::Index i = 0; i < r; ++i) lam(i) = uniform(rng, 0.2, 2.0);
  const Mat q = u * lam.asDiagonal() * u.transpose();
  return 0.5 * (q + q.transpose());
}

inline Vec random_vec(Eigen::Index p, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(p);
  for (Eigen::Index i = 0; i < p; ++i) v(i) = n(rng);
  return v;
}

inline double rel_gap(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace detail

// ---------------------------------------------------------------------------

/// GD on random SPD quadratics contracts below 2/lambda_max and diverges above 2/lambda_min.
inline CriterionResult criterion1(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{1, "GD classical thresholds on random SPD quadratics", false, {}, 0.0};
  const auto t0 = Clock::now();
  Rng rng(hash_combine(opt.master_seed, 1));
  int contract_ok = 0;
  int diverge_ok = 0;
  const int instances = 100;
  for (int inst = 0; inst < instances; ++inst) {
    const Eigen::Index p = 1 + inst % 10;
    Vec lam(p);
    for (Eigen::Index i = 0; i < p; ++i) lam(i) = uniform(rng, 0.5, 5.0);
    const Mat u = random_orthogonal(p, rng);
    const Mat q = u * lam.asDiagonal() * u.transpose();
    const auto prob = StochasticQuadratic::create({0.5 * (q + q.transpose())}, {Vec::Zero(p)}, {1.0});
    Vec theta0 = random_vec(p, rng);
    theta0.normalize();
    RunOptions ro;
    ro.reference = Vec::Zero(p);
    ro.error_metric = prob.expected_q();
    ro.record_iterates = false;
    const auto conv = run(prob, theta0, StepSchedule::constant(0.9 * 2.0 / lam.maxCoeff()), BatchSize::infinite(), 20, 0, ro);
    bool mono = !conv.failed;
    for (std::size_t n = 1; mono && n < conv.errors.size(); ++n) mono = conv.errors[n] < conv.errors[n - 1];
    contract_ok += mono ? 1 : 0;
    const auto div = run(prob, theta0, StepSchedule::constant(1.1 * 2.0 / lam.minCoeff()), BatchSize::infinite(), 20, 0, ro);
    bool grows = !div.failed && div.distances.back() > div.distances.front();
    if (grows) grows = fit_divergence_rate(div).rate > 1.0;
    diverge_ok += grows ? 1 : 0;
  }
  res.seconds = seconds_since(t0);
  res.passed = contract_ok == instances && diverge_ok == instances && res.seconds < kC1RuntimeSec;
  res.details.push_back(std::to_string(contract_ok) + "/100 monotone contractions at C = 0.9*2/lmax; " +
                        std::to_string(diverge_ok) + "/100 divergences with rate > 1 at C = 1.1*2/lmin");
  res.details.push_back("runtime " + fmt(res.seconds, 3) + " s (limit " + fmt(kC1RuntimeSec) + " s)");
  return res;
}

/// f = x^2, x0 = -1, C = 1.1 gives -1, 1.2, -1.44 and rate 1.2.
inline CriterionResult criterion2(const VerifyOptions&) {
  using namespace detail;
  CriterionResult res{2, "worked GD example on f = x^2", false, {}, 0.0};
  const auto t0 = Clock::now();
  const auto prob = StochasticQuadratic::create({Mat::Constant(1, 1, 2.0)}, {Vec::Zero(1)}, {1.0});
  const Vec x0 = Vec::Constant(1, -1.0);
  const auto rec = run(prob, x0, StepSchedule::constant(1.1), BatchSize::infinite(), 2, 0);
  const double expect[3] = {-1.0, 1.2, -1.44};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(rec.iterates[static_cast<std::size_t>(i)](0) - expect[i]));
  const RateFit fit = fit_divergence_rate(rec.distances, FitWindow{0, 2});
  const auto long_rec = run(prob, x0, StepSchedule::constant(1.1), BatchSize::infinite(), 20, 0);
  const RateFit long_fit = fit_divergence_rate(long_rec);
  res.seconds = seconds_since(t0);
  res.passed = worst <= kC2IterateTol && std::abs(fit.rate - 1.2) <= kC2RateTol && std::abs(long_fit.rate - 1.2) <= kC2RateTol;
  res.details.push_back("iterates " + fmt(rec.iterates[0](0), 17) + ", " + fmt(rec.iterates[1](0), 17) + ", " +
                        fmt(rec.iterates[2](0), 17) + " (max error " + fmt(worst, 3) + ")");
  res.details.push_back("fitted rate " + fmt(fit.rate, 15) + " over 0..2, " + fmt(long_fit.rate, 15) + " over 2..20");
  return res;
}

/// The closed-form one-step expectation equals exact batch enumeration.
inline CriterionResult criterion3(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{3, "one-step recursion formula versus batch enumeration", false, {}, 0.0};
  const auto t0 = Clock::now();
  Rng rng(hash_combine(opt.master_seed, 3));
  double worst = 0.0;
  int agree = 0;
  const int tuples = 200;
  for (int t = 0; t < tuples; ++t) {
    const auto p = static_cast<Eigen::Index>(uniform_index(rng, 1, 3));
    const std::size_t nc = uniform_index(rng, 1, 4);
    const std::uint64_t k = uniform_index(rng, 1, 3);
    std::vector<Mat> qs;
    std::vector<Vec> rs;
    std::vector<double> ps;
    double total = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const auto r = static_cast<Eigen::Index>(uniform_index(rng, 1, static_cast<std::size_t>(p)));
      qs.push_back(random_psd(p, r, rng));
      rs.push_back(qs.back() * random_vec(p, rng));
      ps.push_back(uniform(rng, 0.2, 1.0));
      total += ps.back();
    }
    for (double& w : ps) w /= total;
    double s = 0.0;
    for (double w : ps) s += w;
    ps.back() += 1.0 - s;
    const auto prob = StochasticQuadratic::create(qs, rs, ps);
    const QuadraticGeometry g = expected_geometry(prob);
    const Vec theta = random_vec(p, rng);
    const double c = uniform(rng, 0.0, 1.5) / g.lambdas(0);
    const RecursionValues v = recursion_oracle(prob, g, theta, c, k);
    const double gap = rel_gap(v.formula, v.enumeration);
    worst = std::max(worst, gap);
    agree += gap <= kC3Tol ? 1 : 0;
  }
  res.seconds = seconds_since(t0);
  res.passed = agree == tuples && res.seconds < kC3RuntimeSec;
  res.details.push_back(std::to_string(agree) + "/200 tuples agree; worst relative gap " + fmt(worst, 3) +
                        " (tolerance " + fmt(kC3Tol) + ")");
  res.details.push_back("runtime " + fmt(res.seconds, 3) + " s (limit " + fmt(kC3RuntimeSec) + " s)");
  return res;
}

/// Monte-Carlo one-step error ratios bracket the homogeneous threshold 0.8.
inline CriterionResult criterion4(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{4, "homogeneous threshold sharpness for Q in {1,3}", false, {}, 0.0};
  const auto t0 = Clock::now();
  const auto prob = StochasticQuadratic::uniform({Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 3.0)},
                                                 {Vec::Zero(1), Vec::Zero(1)});
  const QuadraticGeometry g = expected_geometry(prob);
  const ThresholdReport rep = homogeneous_thresholds(g, BatchSize::finite(1));
  bool ok = std::abs(rep.conv_ub - 0.8) < 1e-12 && std::abs(rep.div_lb - 0.8) < 1e-12;
  res.details.push_back("conv_ub " + fmt(rep.conv_ub, 15) + ", div_lb " + fmt(rep.div_lb, 15));
  const Vec theta = Vec::Constant(1, 1.0);
  const double e0 = theta.dot(g.eq * theta);
  for (const auto& [c, below] : {std::pair{0.72, true}, std::pair{0.88, false}}) {
    Rng rng(hash_combine(opt.master_seed, c < 0.8 ? 41 : 42));
    std::discrete_distribution<std::size_t> pick(prob.probs().begin(), prob.probs().end());
    const std::size_t n = 100000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec grad = prob.gradient(pick(rng), theta);
      const Vec next = sgd_k_step(theta, std::span<const Vec>(&grad, 1), c);
      const double ratio = next.dot(g.eq * next) / e0;
      sum += ratio;
      sum2 += ratio * ratio;
    }
    const double mean = sum / static_cast<double>(n);
    const double se = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
    const double z = (mean - 1.0) / se;
    ok = ok && (below ? z < -kC4Sigmas : z > kC4Sigmas);
    res.details.push_back("C = " + fmt(c) + ": mean ratio " + fmt(mean, 6) + " (se " + fmt(se, 3) + ", z = " + fmt(z, 4) + ")");
  }
  res.seconds = seconds_since(t0);
  res.passed = ok;
  return res;
}

/// Whitened matrices are PSD and s_q > 0 exactly when Q is not almost surely constant.
inline CriterionResult criterion5(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{5, "Jensen bound and s_q positivity over random mixtures", false, {}, 0.0};
  const auto t0 = Clock::now();
  Rng rng(hash_combine(opt.master_seed, 5));
  int jensen_ok = 0;
  int positivity_ok = 0;
  double worst_bmin = 0.0;
  const int total = 1000;
  for (int t = 0; t < total; ++t) {
    const bool degenerate = t % 2 == 0;
    const auto p = static_cast<Eigen::Index>(uniform_index(rng, 1, 4));
    const std::size_t nc = uniform_index(rng, 2, 5);
    std::vector<Mat> qs;
    std::vector<Vec> rs;
    const Mat shared = random_psd(p, static_cast<Eigen::Index>(uniform_index(rng, 1, static_cast<std::size_t>(p))), rng);
    for (std::size_t i = 0; i < nc; ++i) {
      const Mat q = degenerate ? shared
                               : random_psd(p, static_cast<Eigen::Index>(uniform_index(rng, 1, static_cast<std::size_t>(p))), rng);
      qs.push_back(q);
      rs.push_back(q * random_vec(p, rng));
    }
    const auto prob = StochasticQuadratic::uniform(qs, rs);
    const QuadraticGeometry g = expected_geometry(prob);
    worst_bmin = std::min(worst_bmin, g.b_min);
    jensen_ok += g.b_min >= -kC5JensenTol ? 1 : 0;
    const bool s_positive = g.s_q > kC5PositivityTol * g.lambdas(0) * g.lambdas(0);
    positivity_ok += s_positive == !degenerate ? 1 : 0;
  }
  res.seconds = seconds_since(t0);
  res.passed = jensen_ok == total && positivity_ok == total;
  res.details.push_back(std::to_string(jensen_ok) + "/1000 whitened matrices >= -1e-9 (most negative eigenvalue " +
                        fmt(worst_bmin, 3) + ")");
  res.details.push_back(std::to_string(positivity_ok) + "/1000 match s_q > 0 <=> Q not a.s. constant (500 constant, 500 random)");
  return res;
}

/// Ball-averaged thresholds on a quadratic mixture match the closed form.
inline CriterionResult criterion6(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{6, "mechanism thresholds match quadratic thresholds", false, {}, 0.0};
  const auto t0 = Clock::now();
  Rng rng(hash_combine(opt.master_seed, 6));
  double worst = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 3; ++inst) {
    const Eigen::Index p = 1 + inst;
    std::vector<Mat> qs;
    for (int i = 0; i < 4; ++i) qs.push_back(random_psd(p, p, rng) + 0.1 * Mat::Identity(p, p));
    const auto prob = StochasticQuadratic::uniform(qs, std::vector<Vec>(4, Vec::Zero(p)));
    const QuadraticGeometry qg = expected_geometry(prob);
    const LocalGeometry lg = local_geometry(prob, Vec::Zero(p), kDefaultEpsilon, 10000, hash_combine(opt.master_seed, 60 + inst));
    for (const BatchSize k : {BatchSize::finite(1), BatchSize::finite(2), BatchSize::finite(10), BatchSize::finite(100),
                              BatchSize::infinite()}) {
      const ThresholdReport a = homogeneous_thresholds(qg, k);
      const ThresholdReport b = mechanism_thresholds(lg, k);
      const double gap = std::max(std::abs(a.conv_ub - b.conv_ub) / a.conv_ub, std::abs(a.div_lb - b.div_lb) / a.div_lb);
      worst = std::max(worst, gap);
      ok = ok && gap <= kC6RelTol;
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = ok;
  res.details.push_back("worst relative gap " + fmt(worst, 3) + " over p = 1..3, k in {1,2,10,100,inf}, n = 10^4 (tolerance 1%)");
  return res;
}

namespace detail {

/// max-norm error scaled by max(1, max-norm of the reference).
inline double scaled_error(const Mat& approx, const Mat& exact) {
  return (approx - exact).cwiseAbs().maxCoeff() / std::max(1.0, exact.cwiseAbs().maxCoeff());
}

template <class ValueFn, class GradFn, class HessFn>
double fd_error(const Vec& x, ValueFn value, GradFn grad, HessFn hess, double h) {
  const Eigen::Index p = x.size();
  Vec g_fd(p);
  Mat h_fd(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g_fd(i) = (value(xp) - value(xm)) / (2.0 * h);
    h_fd.col(i) = (grad(xp) - grad(xm)) / (2.0 * h);
  }
  return std::max(scaled_error(g_fd, grad(x)), scaled_error(h_fd, hess(x)));
}

}  // namespace detail

/// Analytic derivatives match central differences; the circular basin is C^2 across both circles.
inline CriterionResult criterion7(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{7, "finite-difference derivative checks for QC and ST", false, {}, 0.0};
  const auto t0 = Clock::now();
  Rng rng(hash_combine(opt.master_seed, 7));
  auto random_qc = [&] {
    QcComponent c;
    c.q1 = uniform(rng, 0.1, 2.0);
    c.q2 = uniform(rng, 0.0, 0.5);
    c.q3 = uniform(rng, -15.0, 0.0);
    c.c1 = uniform(rng, 0.5, 2.0);
    c.c2 = uniform(rng, 0.2, 1.0);
    c.c3 = c.c2 + uniform(rng, 0.5, 3.0);
    c.c4 = uniform(rng, 0.0, 1.0);
    return c;
  };
  int qc_pass = 0;
  double qc_worst = 0.0;
  int qc_points = 0;
  while (qc_points < 100) {
    const QcComponent c = random_qc();
    Vec2 x;
    if (qc_points % 2 == 0) {
      const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double r = uniform(rng, c.c2, c.c3);
      x << r * std::cos(ang), r * std::sin(ang);
    } else {
      x << uniform(rng, -10.0, 10.0), uniform(rng, -20.0, 15.0);
    }
    const double rad = x.norm();
    const double gap = std::abs(c.quadratic_basin(x).value - c.circular_basin(x).value);
    if (gap < 1e-3 || std::abs(rad - c.c2) < 1e-3 || std::abs(rad - c.c3) < 1e-3) continue;
    ++qc_points;
    const double err = fd_error(
        Vec(x), [&](const Vec& y) { return c.eval(y).value; }, [&](const Vec& y) { return Vec(c.eval(y).gradient); },
        [&](const Vec& y) { return Mat(c.eval(y).hessian); }, kC7FdStep);
    qc_worst = std::max(qc_worst, err);
    qc_pass += err <= kC7FdRelTol ? 1 : 0;
  }
  int st_pass = 0;
  double st_worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index p = 5;
    StComponent s{Vec(p), Vec(p), Vec(p)};
    Vec x(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      s.c1(j) = uniform(rng, 0.5, 1.5);
      s.c2(j) = uniform(rng, -20.0, 0.0);
      s.c3(j) = uniform(rng, 0.0, 8.0);
      x(j) = uniform(rng, -5.0, 5.0);
    }
    const double err = fd_error(
        x, [&](const Vec& y) { return s.value(y); }, [&](const Vec& y) { return s.gradient(y); },
        [&](const Vec& y) { return s.hessian(y); }, kC7FdStep);
    st_worst = std::max(st_worst, err);
    st_pass += err <= kC7FdRelTol ? 1 : 0;
  }
  // One-sided differences across r = c2 and r = c3 along random rays.
  int c2_pass = 0;
  double c2_worst = 0.0;
  const int rays = 50;
  const double d = 1e-8;
  for (int t = 0; t < rays; ++t) {
    const QcComponent c = random_qc();
    const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec2 u(std::cos(ang), std::sin(ang));
    double err = 0.0;
    for (const double rho : {c.c2, c.c3}) {
      const Vec2 at = rho * u;
      const Vec2 in = (rho - d) * u;
      const Vec2 out = (rho + d) * u;
      const Eval2 ea = c.circular_basin(at);
      const Eval2 ei = c.circular_basin(in);
      const Eval2 eo = c.circular_basin(out);
      const double slope_in = (ea.value - ei.value) / d;
      const double slope_out = (eo.value - ea.value) / d;
      const Vec2 curv_in = (ea.gradient - ei.gradient) / d;
      const Vec2 curv_out = (eo.gradient - ea.gradient) / d;
      err = std::max({err, std::abs(eo.value - ei.value), std::abs(slope_out - slope_in), (curv_out - curv_in).cwiseAbs().maxCoeff(),
                      (eo.hessian - ei.hessian).cwiseAbs().maxCoeff()});
    }
    c2_worst = std::max(c2_worst, err);
    c2_pass += err <= kC7C2Tol ? 1 : 0;
  }
  res.seconds = seconds_since(t0);
  res.passed = qc_pass == 100 && st_pass == 100 && c2_pass == rays;
  res.details.push_back("QC: " + std::to_string(qc_pass) + "/100 points within 1e-5 (worst " + fmt(qc_worst, 3) + ")");
  res.details.push_back("ST: " + std::to_string(st_pass) + "/100 points within 1e-5 (worst " + fmt(st_worst, 3) + ")");
  res.details.push_back("circular basin C2 across both circles: " + std::to_string(c2_pass) + "/" + std::to_string(rays) +
                        " rays within 1e-4 (worst " + fmt(c2_worst, 3) + ")");
  return res;
}

/// Orderings of the threshold tables on generated models.
inline CriterionResult criterion8(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{8, "threshold table orderings on generated QC and ST models", false, {}, 0.0};
  const auto t0 = Clock::now();
  bool ok = true;
  auto check = [&](bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      res.details.push_back("violated: " + what);
    }
  };
  const GeometryOptions gopt;
  // QC: per-basin flat/sharp ordering, monotonicity in k, and k = 1 strictly below k = inf.
  const auto qc = generate_models("qc", opt.qc_model_seed);
  std::map<std::string, LocalGeometry> qg;
  for (const auto& m : qc)
    for (const auto& w : minimizer_names(m)) qg.emplace(model_name(m) + "." + w, model_local_geometry(m, w, gopt));
  const std::vector<BatchSize> qc_ks{BatchSize::finite(1), BatchSize::finite(10), BatchSize::finite(100),
                                     BatchSize::finite(10000), BatchSize::infinite()};
  int qc_checks = 0;
  for (const auto& [key, g] : qg) {
    double prev_l = 0.0;
    double prev_u = 0.0;
    for (const BatchSize k : qc_ks) {
      const ThresholdReport r = mechanism_thresholds(g, k);
      check(r.div_lb >= prev_l && r.conv_ub >= prev_u, key + " thresholds nondecreasing at k = " + k.to_string());
      check(r.conv_ub <= r.div_lb, key + " conv_ub <= div_lb at k = " + k.to_string());
      prev_l = r.div_lb;
      prev_u = r.conv_ub;
      ++qc_checks;
    }
    check(mechanism_thresholds(g, BatchSize::finite(1)).div_lb < mechanism_thresholds(g, BatchSize::infinite()).div_lb,
          key + " div_lb(1) < div_lb(inf)");
  }
  // Models: 1 both sharp, 2 circ sharp, 3 quad sharp, 4 both flat.
  const std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<int>>>> basins{
      {"quad", {{1, 3}, {2, 4}}}, {"circ", {{1, 2}, {3, 4}}}};
  for (const auto& [basin, groups] : basins) {
    for (int s : groups.first) {
      for (int f : groups.second) {
        const auto& gs = qg.at("qc" + std::to_string(s) + "." + basin);
        const auto& gf = qg.at("qc" + std::to_string(f) + "." + basin);
        for (const BatchSize k : qc_ks) {
          check(mechanism_thresholds(gf, k).div_lb > mechanism_thresholds(gs, k).div_lb,
                basin + ": flat qc" + std::to_string(f) + " div_lb > sharp qc" + std::to_string(s) + " at k = " + k.to_string());
          ++qc_checks;
        }
      }
    }
    check(qg.at("qc1." + basin).lambdas(0) >= 10.0 * qg.at("qc4." + basin).lambdas(0), basin + ": lambda_1 of qc1 >= 10x qc4");
  }
  // ST: flattest above sharpest at every k, columns monotone in k.
  const auto st = generate_models("st", opt.st_model_seed);
  const std::vector<BatchSize> st_ks{BatchSize::finite(1),   BatchSize::finite(100), BatchSize::finite(200),
                                     BatchSize::finite(350), BatchSize::finite(500), BatchSize::infinite()};
  int st_checks = 0;
  for (const auto& m : st) {
    const LocalGeometry gf = model_local_geometry(m, "flattest", gopt);
    const LocalGeometry gs = model_local_geometry(m, "sharpest", gopt);
    double pf = 0.0;
    double ps = 0.0;
    double pfu = 0.0;
    double psu = 0.0;
    for (const BatchSize k : st_ks) {
      const ThresholdReport rf = mechanism_thresholds(gf, k);
      const ThresholdReport rs = mechanism_thresholds(gs, k);
      check(rf.div_lb > rs.div_lb, model_name(m) + " flattest div_lb > sharpest at k = " + k.to_string());
      check(rf.div_lb >= pf && rs.div_lb >= ps && rf.conv_ub >= pfu && rs.conv_ub >= psu,
            model_name(m) + " thresholds nondecreasing at k = " + k.to_string());
      pf = rf.div_lb;
      ps = rs.div_lb;
      pfu = rf.conv_ub;
      psu = rs.conv_ub;
      ++st_checks;
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = ok;
  res.details.insert(res.details.begin(), "QC seed " + std::to_string(opt.qc_model_seed) + ": " + std::to_string(qc_checks) +
                                              " ordered comparisons; ST seed " + std::to_string(opt.st_model_seed) + ": " +
                                              std::to_string(st_checks) + " k columns per model");
  return res;
}

namespace detail {

inline ExperimentPlan acceptance_plan(const std::string& family, std::uint64_t model_seed, std::uint64_t master_seed) {
  nlohmann::json j = {{"family", family}, {"models", {{"generate_seed", model_seed}}}, {"master_seed", master_seed},
                      {"rates", {"1.5l", "0.5u"}},  {"runs_per_cell", 100},            {"max_iters", 20}};
  return plan_from_json(j);
}

}  // namespace detail

/// Escape above 1.5 div_lb, stability below 0.5 conv_ub.
inline CriterionResult criterion9(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{9, "escape above 1.5*div_lb and stability below 0.5*conv_ub", false, {}, 0.0};
  const auto t0 = Clock::now();
  bool ok = true;
  int gated = 0;
  int gated_pass = 0;
  std::vector<std::string> info;
  auto record = [&](bool is_gated, bool pass, const std::string& line) {
    if (is_gated) {
      ++gated;
      gated_pass += pass ? 1 : 0;
      ok = ok && pass;
      if (!pass) res.details.push_back("FAIL " + line);
    } else {
      info.push_back("info " + line);
    }
  };
  const PlanResult qc = run_plan(acceptance_plan("qc", opt.qc_model_seed, opt.master_seed));
  for (const auto& cr : qc.cells) {
    const auto& c = cr.cell;
    const std::string label = c.id + ": diverged " + std::to_string(cr.summary.diverged) + "/" + std::to_string(cr.summary.runs);
    if (!c.error.empty()) {
      record(true, false, c.id + ": " + c.error);
    } else if (c.rate_spec.text == "1.5l") {
      record(c.minimizer == "quad", cr.summary.diverged == cr.summary.runs, label);
    } else {
      record(true, cr.summary.diverged == 0, label);
    }
  }
  const PlanResult st = run_plan(acceptance_plan("st", opt.st_model_seed, opt.master_seed));
  for (const auto& cr : st.cells) {
    const auto& c = cr.cell;
    if (!c.error.empty()) {
      record(true, false, c.id + ": " + c.error);
    } else if (c.rate_spec.text == "1.5l") {
      record(c.init_radius <= kC9StDivergeMaxRadius, cr.summary.diverged == cr.summary.runs,
             c.id + ": diverged " + std::to_string(cr.summary.diverged) + "/" + std::to_string(cr.summary.runs));
    } else {
      record(true, cr.summary.bounded == cr.summary.runs,
             c.id + ": bounded " + std::to_string(cr.summary.bounded) + "/" + std::to_string(cr.summary.runs) +
                 " (band " + fmt(c.band, 3) + ", max distance " + fmt(cr.summary.max_dist, 3) + ")");
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = ok && res.seconds < kC9RuntimeSec;
  res.details.insert(res.details.begin(), std::to_string(gated_pass) + "/" + std::to_string(gated) +
                                              " gated cells pass (100 runs x 20 iterations each); runtime " +
                                              fmt(res.seconds, 4) + " s (limit " + fmt(kC9RuntimeSec) + " s)");
  for (const auto& s : info) res.details.push_back(s);
  return res;
}

/// At a step between div_lb(1) and div_lb(inf), SGD-1 escapes more often than GD, which never escapes.
inline CriterionResult criterion10(const VerifyOptions& opt) {
  using namespace detail;
  CriterionResult res{10, "batch-size ordering of escape between the two thresholds", false, {}, 0.0};
  const auto t0 = Clock::now();
  nlohmann::json j = {{"family", "qc"},
                      {"models", {{"generate_seed", opt.qc_model_seed}, {"names", {"qc1"}}}},
                      {"minimizers", {"quad"}},
                      {"methods", {1, "inf"}},
                      {"rates", {"0.25l@1+0.75l@inf"}},
                      {"master_seed", opt.master_seed},
                      {"runs_per_cell", 100},
                      {"max_iters", 20}};
  const PlanResult pr = run_plan(plan_from_json(j));
  const LocalGeometry& g = pr.geometry.at("qc1.quad");
  const double l1 = mechanism_thresholds(g, BatchSize::finite(1)).div_lb;
  const double linf = mechanism_thresholds(g, BatchSize::infinite()).div_lb;
  const auto& sgd1 = pr.cells.at(0);
  const auto& gd = pr.cells.at(1);
  const double rate = sgd1.cell.rate;
  res.seconds = seconds_since(t0);
  res.passed = sgd1.cell.error.empty() && gd.cell.error.empty() && l1 < rate && rate < linf &&
               gd.summary.frac_diverged == 0.0 && sgd1.summary.frac_diverged > gd.summary.frac_diverged;
  res.details.push_back("qc1 quadratic basin: div_lb(1) = " + fmt(l1, 6) + " < rate " + fmt(rate, 6) + " < div_lb(inf) = " + fmt(linf, 6));
  res.details.push_back("SGD-1 diverged " + std::to_string(sgd1.summary.diverged) + "/100, GD diverged " +
                        std::to_string(gd.summary.diverged) + "/100");
  return res;
}

inline const std::vector<std::function<CriterionResult(const VerifyOptions&)>>& criteria() {
  static const std::vector<std::function<CriterionResult(const VerifyOptions&)>> all{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  return all;
}

inline std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.title << " (" << detail::fmt(r.seconds, 3) << " s)";
  return os.str();
}

/// Runs the selected criteria, printing one PASS/FAIL line each followed by indented details.
inline std::vector<CriterionResult> run_acceptance(const VerifyOptions& opt, std::ostream& os) {
  std::vector<CriterionResult> out;
  const auto& all = criteria();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    CriterionResult r;
    try {
      r = all[i](opt);
    } catch (const std::exception& e) {
      r = {id, "criterion raised an exception", false, {e.what()}, 0.0};
    }
    os << format_result(r) << '\n';
    for (const auto& d : r.details) os << "    " << d << '\n';
    os.flush();
    out.push_back(std::move(r));
  }
  return out;
}

inline bool all_passed(const std::vector<CriterionResult>& rs) {
  for (const auto& r : rs)
    if (!r.passed) return false;
  return !rs.empty();
}

}  // namespace sgdk::acceptance
