// The SGD-k iteration, the one-step error recursion and rate fitting.
#include "sgdk/sgd.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace sgdk;
using namespace sgdk::testing;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

/// Expected next error of a homogeneous problem for batch size k.
double expected_next(const RecursionTerms& t, double c, std::uint64_t k) {
  return t.e - 2.0 * c * t.e2 + c * c * t.e3 + c * c / static_cast<double>(k) * t.e_m;
}

}  // namespace

TEST(SgdStep, AveragesGradients) {
  const std::vector<Vec> grads{v2(1.0, 0.0), v2(3.0, -2.0)};
  const Vec next = sgd_k_step(v2(1.0, 1.0), grads, 0.5);
  EXPECT_TRUE(next.isApprox(v2(1.0 - 0.5 * 2.0, 1.0 + 0.5 * 1.0)));
  EXPECT_DOUBLE_EQ(sgd_k_step(v1(1.0), std::vector<Vec>{v1(2.0)}, 1.1)(0), -1.2);
  EXPECT_DOUBLE_EQ(sgd_k_step(v1(-1.2), std::vector<Vec>{v1(-2.4)}, 1.1)(0), 1.44);
}

TEST(SgdStep, ZeroStepKeepsPoint) {
  const Vec x = v2(0.3, -0.7);
  EXPECT_EQ(sgd_k_step(x, std::vector<Vec>{v2(5.0, 5.0)}, 0.0), x);
}

TEST(SgdStep, ProjectsOntoBox) {
  const Box box{v2(-1.0, -1.0), v2(1.0, 1.0)};
  const Vec next = sgd_k_step(v2(0.0, 0.0), std::vector<Vec>{v2(-10.0, 0.5)}, 1.0, box);
  EXPECT_TRUE(next.isApprox(v2(1.0, -0.5)));
  EXPECT_TRUE(box.contains(next));
}

TEST(SgdStep, RejectsBadInput) {
  EXPECT_THROW(sgd_k_step(v1(0.0), std::vector<Vec>{}, 1.0), std::invalid_argument);
  EXPECT_THROW(sgd_k_step(v1(0.0), std::vector<Vec>{v1(std::nan(""))}, 1.0), NonFiniteGradient);
  EXPECT_THROW(sgd_k_step(v1(0.0), std::vector<Vec>{v1(1.0)}, std::numeric_limits<double>::infinity()),
               std::invalid_argument);
  EXPECT_THROW(sgd_k_step(v1(0.0), std::vector<Vec>{v2(1.0, 1.0)}, 1.0), std::invalid_argument);
}

TEST(SgdRun, ScalarGrowthAndContraction) {
  const auto q = scalar_mixture({2.0}, {0.0});
  const RunRecord grow = run(q, v1(1.0), StepSchedule::constant(1.1), BatchSize::finite(1), 2, 1);
  ASSERT_EQ(grow.distances.size(), 3u);
  EXPECT_DOUBLE_EQ(grow.distances[0], 1.0);
  EXPECT_NEAR(grow.distances[1], 1.2, 1e-15);
  EXPECT_NEAR(grow.distances[2], 1.44, 1e-15);
  EXPECT_NEAR(grow.iterates[1](0), -1.2, 1e-15);

  const RunRecord stop = run(q, v1(1.0), StepSchedule::constant(0.5), BatchSize::finite(3), 4, 1);
  for (std::size_t n = 1; n < stop.distances.size(); ++n) EXPECT_EQ(stop.distances[n], 0.0);

  const RunRecord still = run(q, v1(0.7), StepSchedule::constant(0.0), BatchSize::finite(1), 5, 1);
  for (const Vec& x : still.iterates) EXPECT_EQ(x(0), 0.7);
}

TEST(SgdRun, DeterministicForSeed) {
  Rng rng(21);
  const auto q = general_mixture(3, 4, rng);
  const Vec x0 = gaussian(3, rng);
  const auto a = run(q, x0, StepSchedule::constant(0.3), BatchSize::finite(2), 50, 99);
  const auto b = run(q, x0, StepSchedule::constant(0.3), BatchSize::finite(2), 50, 99);
  const auto c = run(q, x0, StepSchedule::constant(0.3), BatchSize::finite(2), 50, 100);
  EXPECT_EQ(a.distances, b.distances);
  EXPECT_NE(a.distances, c.distances);
}

TEST(SgdRun, InfiniteBatchIsGradientDescent) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = general_mixture(3, 3, rng);
    const Mat eq = q.expected_q();
    const Vec er = q.expected_r();
    const Vec x0 = gaussian(3, rng);
    const double c = unif(rng, 0.05, 0.5);
    const auto rec = run(q, x0, StepSchedule::constant(c), BatchSize::infinite(), 20, 5);
    Vec x = x0;
    for (std::size_t n = 1; n <= 20; ++n) {
      x = x - c * (eq * x + er);
      EXPECT_LE((rec.iterates[n] - x).norm(), 1e-12 * (1.0 + x.norm()));
    }
  }
}

TEST(SgdRun, HarmonicSchedule) {
  const auto q = scalar_mixture({1.0}, {0.0});
  const auto rec = run(q, v1(1.0), StepSchedule::harmonic(0.5), BatchSize::finite(1), 3, 1);
  EXPECT_NEAR(rec.iterates[1](0), 0.5, 1e-15);
  EXPECT_NEAR(rec.iterates[2](0), 0.5 * 0.75, 1e-15);
  EXPECT_NEAR(rec.iterates[3](0), 0.5 * 0.75 * (1.0 - 0.5 / 3.0), 1e-15);
  EXPECT_THROW(StepSchedule::harmonic(1.0).at(0), std::invalid_argument);
}

TEST(SgdRun, RecordsOverflowAsFailure) {
  const auto q = scalar_mixture({1.0}, {0.0});
  const auto rec = run(q, v1(1.0), StepSchedule::constant(1e200), BatchSize::finite(1), 10, 1);
  EXPECT_TRUE(rec.failed);
  EXPECT_GT(rec.failed_at, 0u);
  EXPECT_FALSE(rec.diagnostic.empty());
  EXPECT_EQ(rec.distances.size(), rec.failed_at);
}

TEST(SgdRun, SamplingFollowsProbabilities) {
  // One step from 0 on f_i = x^2/2 - a_i x moves to c * mean of sampled a_i.
  const auto q = StochasticQuadratic::create({Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0)}, {v1(-1.0), v1(1.0)},
                                             {0.8, 0.2});
  int plus = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto rec = run(q, v1(0.0), StepSchedule::constant(1.0), BatchSize::finite(1), 1, static_cast<std::uint64_t>(i));
    if (rec.iterates[1](0) > 0.0) ++plus;
  }
  const double frac = static_cast<double>(plus) / n;
  EXPECT_NEAR(frac, 0.8, 4.0 * std::sqrt(0.16 / n));
}

TEST(Recursion, WorkedScalarExample) {
  // Q in {1, 3}, r = 0: E e_{N+1} = e (1 - 2c*2 + c^2 * 4) + (c^2/k) * M d^2, e = 2 d^2, M = 2.
  const auto q = scalar_mixture({1.0, 3.0}, {0.0, 0.0});
  const QuadraticGeometry g = expected_geometry(q);
  const double c = 0.3;
  const auto v = recursion_oracle(q, g, v1(1.0), c, 2);
  const double expected = 2.0 * (1.0 - 4.0 * c + 4.0 * c * c) + c * c / 2.0 * 2.0;
  EXPECT_NEAR(v.formula, expected, 1e-14);
  EXPECT_NEAR(v.enumeration, expected, 1e-14);
}

TEST(Recursion, HomogeneousHasNoNoiseTerms) {
  Rng rng(23);
  const auto q = homogeneous_mixture(3, 3, rng);
  const QuadraticGeometry g = expected_geometry(q);
  const RecursionTerms t = recursion_terms(q, g, gaussian(3, rng));
  EXPECT_NEAR(t.cross, 0.0, 1e-14);
  EXPECT_NEAR(t.noise, 0.0, 1e-14);
}

TEST(Recursion, FormulaMatchesEnumerationOnRandomTuples) {
  Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index p = unif_int(rng, 1, 4);
    const int nc = unif_int(rng, 1, 4);
    const auto q = general_mixture(p, nc, rng);
    const QuadraticGeometry g = expected_geometry(q);
    const Vec theta = g.theta_star + gaussian(p, rng);
    const double c = unif(rng, 0.0, 1.5);
    const auto k = static_cast<std::uint64_t>(unif_int(rng, 1, 4));
    const auto v = recursion_oracle(q, g, theta, c, k);
    EXPECT_NEAR(v.formula, v.enumeration, 1e-10 * (1.0 + std::abs(v.enumeration))) << "trial " << trial;
  }
}

TEST(Recursion, RejectsOversizedEnumeration) {
  const auto q = scalar_mixture({1.0, 2.0, 3.0, 4.0}, {0.0, 0.0, 0.0, 0.0});
  const QuadraticGeometry g = expected_geometry(q);
  EXPECT_THROW(recursion_oracle(q, g, v1(1.0), 0.1, 20, 1000), std::invalid_argument);
  EXPECT_THROW(recursion_oracle(q, g, v1(1.0), 0.1, 0), std::invalid_argument);
}

TEST(Recursion, HomogeneousSingleStepContractsAndGrows) {
  // Below conv_ub the expected error shrinks from every start; above div_lb it grows along the active eigenvector.
  Rng rng(25);
  const auto q = homogeneous_mixture(2, 3, rng);
  const QuadraticGeometry g = expected_geometry(q);
  for (std::uint64_t k : {1u, 3u, 50u}) {
    const ThresholdReport r = homogeneous_thresholds(g, BatchSize::finite(k));
    for (int i = 0; i < 10000; ++i) {
      const Vec d = gaussian(2, rng);
      EXPECT_LT(expected_next(recursion_terms(q, g, d), 0.95 * r.conv_ub, k), d.dot(g.eq * d));
    }
    const Vec vj = g.range_basis.col(r.j_index - 1);
    const RecursionTerms t = recursion_terms(q, g, vj);
    EXPECT_GT(expected_next(t, 1.05 * r.div_lb, k), t.e);
  }
}

TEST(RateFit, RecoversGeometricRate) {
  std::vector<double> d;
  for (int n = 0; n <= 20; ++n) d.push_back(0.3 * std::pow(1.2, n));
  const RateFit fit = fit_divergence_rate(d, default_fit_window(20));
  EXPECT_NEAR(fit.rate, 1.2, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(RateFit, ConstantAndInvalidInputs) {
  const std::vector<double> flat(10, 2.0);
  const RateFit fit = fit_divergence_rate(flat, FitWindow{0, 9});
  EXPECT_DOUBLE_EQ(fit.rate, 1.0);
  EXPECT_DOUBLE_EQ(fit.r2, 1.0);
  std::vector<double> zero{1.0, 0.5, 0.0, 0.1};
  EXPECT_THROW(fit_divergence_rate(zero, FitWindow{0, 3}), std::invalid_argument);
  EXPECT_THROW(fit_divergence_rate(flat, FitWindow{3, 3}), std::invalid_argument);
  EXPECT_THROW(fit_divergence_rate(flat, FitWindow{0, 10}), std::invalid_argument);
  EXPECT_EQ(default_fit_window(3).first, 0u);
  EXPECT_EQ(default_fit_window(10).first, 2u);
}

TEST(RateFit, MatchesRunGrowthOnScalar) {
  const auto q = scalar_mixture({2.0}, {0.0});
  const auto rec = run(q, v1(1.0), StepSchedule::constant(1.1), BatchSize::finite(1), 30, 1);
  const RateFit fit = fit_divergence_rate(rec);
  EXPECT_NEAR(fit.rate, 1.2, 1e-12);
}
