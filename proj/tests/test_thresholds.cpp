// Batch sizes and the step-size threshold formulas.
#include "sgdk/quadratic.hpp"
#include "sgdk/sgd.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace sgdk;
using namespace sgdk::testing;

namespace {

// Independent restatement of the homogeneous bounds: the bracket rule is read
// off interval by interval instead of scanning for the first admissible index.
struct OracleBounds {
  double conv_ub;
  double div_lb;
  int j;  // 1-based
};

OracleBounds oracle_homogeneous(const std::vector<double>& lam, double s, double t, double k) {
  const auto m = static_cast<int>(lam.size());
  const double ik = std::isinf(k) ? 0.0 : 1.0 / k;
  const double l1 = lam.front();
  const double lm = lam.back();
  const double lc = (std::isinf(k) || k > t / (l1 * lm)) ? l1 : lm;
  OracleBounds o{};
  o.conv_ub = 2.0 * lc / (lc * lc + t * ik);
  int j = m;
  if (m == 1) {
    j = 1;
  } else if (!std::isinf(k)) {
    auto edge = [&](int l) { return s / (lam[static_cast<std::size_t>(l - 1)] * lam[static_cast<std::size_t>(l)]); };
    if (k <= edge(1)) {
      j = 1;
    } else {
      for (int l = 2; l <= m - 1; ++l)
        if (edge(l - 1) < k && k <= edge(l)) j = l;
    }
  }
  const double lj = lam[static_cast<std::size_t>(j - 1)];
  o.div_lb = 2.0 * lj / (lj * lj + s * ik);
  o.j = j;
  return o;
}

std::vector<double> random_spectrum(Rng& rng, int m) {
  std::vector<double> lam;
  for (int i = 0; i < m; ++i) lam.push_back(unif(rng, 0.1, 5.0));
  std::sort(lam.rbegin(), lam.rend());
  return lam;
}

Vec as_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST(BatchSize, ParsesIntegersAndInfinity) {
  EXPECT_EQ(BatchSize::parse("17").value(), 17u);
  for (const char* s : {"inf", "Inf", "infinity", "gd"}) EXPECT_TRUE(BatchSize::parse(s).is_infinite()) << s;
  EXPECT_EQ(BatchSize::infinite().to_string(), "inf");
  EXPECT_EQ(BatchSize::finite(4).inverse(), 0.25);
  EXPECT_EQ(BatchSize::infinite().inverse(), 0.0);
  EXPECT_LT(BatchSize::finite(3), BatchSize::finite(5));
}

TEST(BatchSize, RejectsNonPositiveAndGarbage) {
  EXPECT_THROW(BatchSize::finite(0), std::invalid_argument);
  EXPECT_THROW(BatchSize::parse("0"), std::invalid_argument);
  EXPECT_THROW(BatchSize::parse("-3"), std::invalid_argument);
  EXPECT_THROW(BatchSize::parse("ten"), std::invalid_argument);
  EXPECT_THROW(BatchSize::parse(""), std::invalid_argument);
}

TEST(HomogeneousForm, MatchesIntervalOracleOnRandomSpectra) {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = unif_int(rng, 1, 6);
    const auto lam = random_spectrum(rng, m);
    const double s = unif(rng, 0.0, 40.0);
    const double t = s + unif(rng, 0.0, 40.0);
    for (double k : {1.0, 2.0, 3.0, 7.0, 50.0, 1000.0, std::numeric_limits<double>::infinity()}) {
      const BatchSize bk = std::isinf(k) ? BatchSize::infinite() : BatchSize::finite(static_cast<std::uint64_t>(k));
      const ThresholdReport r = detail::homogeneous_form(as_vec(lam), s, t, bk, Regime::homogeneous);
      const OracleBounds o = oracle_homogeneous(lam, s, t, k);
      EXPECT_NEAR(r.conv_ub, o.conv_ub, 1e-13 * o.conv_ub);
      EXPECT_NEAR(r.div_lb, o.div_lb, 1e-13 * o.div_lb);
      EXPECT_EQ(r.j_index, o.j);
    }
  }
}

TEST(HomogeneousForm, DeterministicCurvatureGivesGradientDescentThresholds) {
  const Vec lam = (Vec(3) << 4.0, 2.0, 0.5).finished();
  for (const BatchSize k : {BatchSize::finite(1), BatchSize::finite(9), BatchSize::infinite()}) {
    const ThresholdReport r = detail::homogeneous_form(lam, 0.0, 0.0, k, Regime::homogeneous);
    EXPECT_DOUBLE_EQ(r.conv_ub, 2.0 / 4.0);
    EXPECT_DOUBLE_EQ(r.div_lb, 2.0 / 0.5);
  }
}

TEST(HomogeneousForm, KMaxDivIsStrictlyBelowAnIntegerRatio) {
  // s / (lambda_{m-1} lambda_m) = 12 / (2 * 1) = 6 exactly, so the largest integer strictly below is 5.
  const Vec lam = (Vec(2) << 2.0, 1.0).finished();
  EXPECT_EQ(detail::k_max_div(lam, 12.0), 5);
  EXPECT_EQ(detail::k_max_div(lam, 12.5), 6);
  EXPECT_EQ(detail::k_max_div(lam, 1.0), 0);
  EXPECT_EQ(detail::k_max_div(Vec::Constant(1, 2.0), 100.0), 0);
}

TEST(HomogeneousForm, KMaxConvIsNearestInteger) {
  const Vec lam = (Vec(2) << 2.0, 1.0).finished();
  EXPECT_EQ(detail::k_max_conv(lam, 2.0 * 6.4), 6);
  EXPECT_EQ(detail::k_max_conv(lam, 2.0 * 6.6), 7);
}

TEST(HomogeneousForm, RejectsEmptySpectrum) {
  EXPECT_THROW(detail::homogeneous_form(Vec(0), 1.0, 1.0, BatchSize::finite(1), Regime::homogeneous),
               std::invalid_argument);
}

TEST(ThresholdProperties, MonotoneInKAndOrderedOnRandomGeometries) {
  Rng rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    const auto prob = general_mixture(unif_int(rng, 1, 4), unif_int(rng, 2, 4), rng);
    const QuadraticGeometry g = expected_geometry(prob);
    double prev_u = 0.0;
    double prev_l = 0.0;
    for (std::uint64_t k = 1; k <= 1001; ++k) {
      const BatchSize bk = k == 1001 ? BatchSize::infinite() : BatchSize::finite(k);
      const ThresholdReport r = homogeneous_thresholds(g, bk);
      ASSERT_GT(r.conv_ub, 0.0);
      ASSERT_LE(r.conv_ub, r.div_lb * (1.0 + 1e-12));
      ASSERT_GE(r.conv_ub, prev_u * (1.0 - 1e-12)) << "k=" << k;
      ASSERT_GE(r.div_lb, prev_l * (1.0 - 1e-12)) << "k=" << k;
      prev_u = r.conv_ub;
      prev_l = r.div_lb;
    }
  }
}

TEST(ThresholdProperties, LargeBatchRecoversGradientDescent) {
  Rng rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    const auto prob = homogeneous_mixture(unif_int(rng, 1, 5), 3, rng);
    const QuadraticGeometry g = expected_geometry(prob);
    const ThresholdReport r = homogeneous_thresholds(g, BatchSize::finite(1'000'000'000));
    EXPECT_NEAR(r.conv_ub, 2.0 / g.lambdas(0), 1e-6 * r.conv_ub);
    EXPECT_NEAR(r.div_lb, 2.0 / g.lambdas(g.m - 1), 1e-6 * r.div_lb);
  }
}

TEST(InhomogeneousThresholds, WorkedScalarExample) {
  // (Q, r) in {(1, -1), (3, 1)}: E[Q] = 2, M = E[Q^2] E[Q] - E[Q]^3 = 2, s = t = 1.
  const auto prob = scalar_mixture({1.0, 3.0}, {-1.0, 1.0});
  const QuadraticGeometry g = expected_geometry(prob);
  EXPECT_FALSE(g.homogeneous);
  EXPECT_NEAR(g.theta_star(0), 0.0, 1e-15);
  EXPECT_NEAR(g.s_q, 1.0, 1e-12);
  EXPECT_NEAR(g.t_q, 1.0, 1e-12);
  const ThresholdReport r = inhomogeneous_thresholds(g, BatchSize::finite(1), 0.5);
  EXPECT_NEAR(r.div_lb, 2.0 * (2.0 + 0.5) / (4.0 + 1.0), 1e-12);
  EXPECT_NEAR(r.conv_ub, 2.0 * 2.0 / (2.0 * 4.0 + 1.0), 1e-12);
  EXPECT_NEAR(inhomogeneous_thresholds(g, BatchSize::finite(1)).gamma, 0.5, 1e-12);
}

TEST(InhomogeneousThresholds, WorkedExampleEmpiricalBracketing) {
  const auto prob = scalar_mixture({1.0, 3.0}, {-1.0, 1.0});
  const QuadraticGeometry g = expected_geometry(prob);
  const Vec theta0 = Vec::Constant(1, 1.0);
  const double e0 = theta0.dot(g.eq * theta0);
  RunOptions opts;
  opts.error_metric = g.eq;
  opts.record_iterates = false;
  for (const auto& [c, grows] : {std::pair{1.2, true}, std::pair{0.3, false}}) {
    double mean = 0.0;
    const int runs = 10000;
    for (int r = 0; r < runs; ++r) {
      const RunRecord rec = run(prob, theta0, StepSchedule::constant(c), BatchSize::finite(1), 5,
                                hash_combine(77, static_cast<std::uint64_t>(r)), opts);
      mean += rec.errors.back() / runs;
    }
    if (grows) {
      EXPECT_GT(mean, 10.0 * e0) << "C=" << c;
    } else {
      EXPECT_LT(mean, 0.5 * e0) << "C=" << c;
    }
  }
}

TEST(InhomogeneousThresholds, RejectsDegenerateAndBadGamma) {
  const auto same_q = scalar_mixture({1.0, 1.0}, {-1.0, 1.0});
  const QuadraticGeometry g0 = expected_geometry(same_q);
  EXPECT_FALSE(g0.homogeneous);
  EXPECT_EQ(g0.s_q, 0.0);
  EXPECT_THROW(inhomogeneous_thresholds(g0, BatchSize::finite(1)), std::invalid_argument);

  const QuadraticGeometry g = expected_geometry(scalar_mixture({1.0, 3.0}, {-1.0, 1.0}));
  EXPECT_THROW(inhomogeneous_thresholds(g, BatchSize::finite(1), 0.0), std::invalid_argument);
  EXPECT_THROW(inhomogeneous_thresholds(g, BatchSize::finite(1), 0.51), std::invalid_argument);
  EXPECT_THROW(inhomogeneous_thresholds(g, BatchSize::infinite(), 0.1), std::invalid_argument);
}

TEST(InhomogeneousThresholds, InfiniteBatchRecoversGradientDescent) {
  const QuadraticGeometry g = expected_geometry(scalar_mixture({1.0, 3.0}, {-1.0, 1.0}));
  const ThresholdReport r = inhomogeneous_thresholds(g, BatchSize::infinite());
  EXPECT_EQ(r.gamma, 0.0);
  EXPECT_NEAR(r.div_lb, 2.0 / 2.0, 1e-12);
  EXPECT_NEAR(r.conv_ub, 2.0 * 2.0 / 4.0, 1e-12);
}

TEST(InhomogeneousThresholds, MonotoneInKAtFixedGamma) {
  Rng rng(404);
  for (int trial = 0; trial < 40; ++trial) {
    const auto prob = general_mixture(unif_int(rng, 1, 3), 3, rng);
    const QuadraticGeometry g = expected_geometry(prob);
    if (g.homogeneous || !(g.s_q > 1e-9)) continue;
    // gamma must satisfy 4 gamma^2 <= s/k for every k considered.
    const std::uint64_t kmax = 200;
    const double gamma = 0.5 * std::sqrt(g.s_q / static_cast<double>(kmax));
    double prev_u = 0.0;
    double prev_l = 0.0;
    for (std::uint64_t k = 1; k <= kmax; ++k) {
      const ThresholdReport r = inhomogeneous_thresholds(g, BatchSize::finite(k), gamma);
      ASSERT_GE(r.div_lb, prev_l * (1.0 - 1e-12));
      ASSERT_GE(r.conv_ub, prev_u * (1.0 - 1e-12));
      prev_u = r.conv_ub;
      prev_l = r.div_lb;
    }
  }
}
