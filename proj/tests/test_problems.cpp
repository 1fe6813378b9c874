// Quadratic-circle sums and Styblinski-Tang sums: components, minimizers and generators.
#include "sgdk/problems/qc.hpp"
#include "sgdk/problems/st.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace sgdk;
using namespace sgdk::testing;

namespace {

constexpr std::uint64_t kSeed = 1;

double fd_slope(auto f, double x, double h = 1e-6) { return (f(x + h) - f(x - h)) / (2.0 * h); }

Vec2 fd_gradient(const QcComponent& c, const Vec2& x, double h = 1e-6) {
  Vec2 g;
  for (int i = 0; i < 2; ++i) {
    Vec2 e = Vec2::Zero();
    e(i) = h;
    g(i) = (c.eval(x + e).value - c.eval(x - e).value) / (2.0 * h);
  }
  return g;
}

Mat2 fd_hessian(const QcComponent& c, const Vec2& x, double h = 1e-5) {
  Mat2 hm;
  for (int i = 0; i < 2; ++i) {
    Vec2 e = Vec2::Zero();
    e(i) = h;
    hm.col(i) = (c.eval(x + e).gradient - c.eval(x - e).gradient) / (2.0 * h);
  }
  return hm;
}

StSumsModel single_st(double a, double b, double c, Eigen::Index p) {
  return StSumsModel("one", RowMat::Constant(1, p, a), RowMat::Constant(1, p, b), RowMat::Constant(1, p, c), {1.0});
}

/// Minimizer of the one-dimensional quartic on [lo, hi] by grid search refined by bisection on the derivative.
double st_grid_min(double a, double b, double c, double lo, double hi) {
  auto f = [&](double x) { return 0.5 * (a * x * x * x * x + b * x * x + c * x); };
  double best = lo;
  for (int i = 0; i <= 200000; ++i) {
    const double x = lo + (hi - lo) * i / 200000.0;
    if (f(x) < f(best)) best = x;
  }
  auto df = [&](double x) { return 2.0 * a * x * x * x + b * x + 0.5 * c; };
  double l = best - 1e-3;
  double r = best + 1e-3;
  for (int it = 0; it < 100; ++it) {
    const double m = 0.5 * (l + r);
    (df(l) * df(m) <= 0.0 ? r : l) = m;
  }
  return 0.5 * (l + r);
}

}  // namespace

TEST(Smoothstep, BoundaryIdentities) {
  EXPECT_EQ(Smoothstep::value(0.0), 0.0);
  EXPECT_EQ(Smoothstep::value(1.0), 1.0);
  EXPECT_EQ(Smoothstep::d1(0.0), 0.0);
  EXPECT_EQ(Smoothstep::d1(1.0), 0.0);
  EXPECT_EQ(Smoothstep::d2(0.0), 0.0);
  EXPECT_EQ(Smoothstep::d2(1.0), 0.0);
  EXPECT_DOUBLE_EQ(Smoothstep::value(0.5), 0.5);
  EXPECT_DOUBLE_EQ(Smoothstep::d1(0.5), 1.875);
  for (double t = 0.05; t < 1.0; t += 0.05) {
    EXPECT_NEAR(Smoothstep::d1(t), fd_slope(Smoothstep::value, t), 1e-8);
    EXPECT_NEAR(Smoothstep::d2(t), fd_slope(Smoothstep::d1, t), 1e-7);
    EXPECT_NEAR(Smoothstep::value(t) + Smoothstep::value(1.0 - t), 1.0, 1e-14);
  }
}

TEST(QcComponent, ParabolaIsZeroSet) {
  QcComponent c{2.0, 0.3, -1.0, 1.0, 0.5, 2.0, 0.0};
  for (double x1 : {-2.0, 0.0, 1.5}) {
    const Vec2 x(x1, 0.3 * x1 * x1 - 1.0);
    EXPECT_NEAR(c.quadratic_basin(x).value, 0.0, 1e-14);
    EXPECT_NEAR(c.quadratic_basin(x).gradient.norm(), 0.0, 1e-14);
  }
}

TEST(QcComponent, RadialLevels) {
  QcComponent c{1.0, 0.0, -15.0, 2.0, 1.0, 3.0, 0.5};
  EXPECT_DOUBLE_EQ(c.circular_basin(Vec2(0.5, 0.0)).value, 0.5);
  EXPECT_DOUBLE_EQ(c.circular_basin(Vec2(0.0, 4.0)).value, 2.5);
  EXPECT_DOUBLE_EQ(c.circular_basin(Vec2(2.0, 0.0)).value, 1.5);
}

TEST(QcComponent, DerivativesMatchFiniteDifferences) {
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    QcComponent c{unif(rng, 0.1, 2.0), unif(rng, 0.0, 0.5), unif(rng, -3.0, 0.0), unif(rng, 0.5, 2.0), unif(rng, 0.0, 1.0),
                  0.0, unif(rng, 0.0, 0.5)};
    c.c3 = c.c2 + unif(rng, 0.5, 3.0);
    const Vec2 x(unif(rng, -3.0, 3.0), unif(rng, -3.0, 3.0));
    QcBranch b;
    const Eval2 e = c.eval(x, &b);
    // Skip points within a finite-difference step of a branch switch.
    bool stable = true;
    for (int k = 0; k < 2; ++k)
      for (double s : {-1e-4, 1e-4}) {
        Vec2 y = x;
        y(k) += s;
        QcBranch by;
        c.eval(y, &by);
        stable = stable && by == b;
      }
    if (!stable) continue;
    EXPECT_LE((e.gradient - fd_gradient(c, x)).norm(), 1e-5 * (1.0 + e.gradient.norm())) << i;
    EXPECT_LE((e.hessian - fd_hessian(c, x)).norm(), 1e-4 * (1.0 + e.hessian.norm())) << i;
  }
}

TEST(QcComponent, TieGoesToQuadraticBasin) {
  QcComponent c{1.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0};
  QcBranch b = QcBranch::circle_inner;
  c.eval(Vec2(0.0, 0.0), &b);
  EXPECT_EQ(b, QcBranch::quadratic);
}

TEST(QcComponent, ValidationRejectsBadParameters) {
  EXPECT_THROW((QcComponent{-1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((QcComponent{1.0, -0.1, 0.0, 1.0, 0.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((QcComponent{1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((QcComponent{1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((QcComponent{1.0, 0.0, std::nan(""), 1.0, 0.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((QcComponent{1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0}.validate()));
  EXPECT_THROW(QcSumsModel("x", {QcComponent{}}, {0.5}), std::invalid_argument);
}

TEST(QcGenerator, MinimizersAreStationaryForEveryComponent) {
  for (const auto& m : generate_qc_models(kSeed)) {
    for (const std::string which : {"circ", "quad"}) {
      const Vec z = m.minimizer(which);
      EXPECT_LE(m.expected_gradient(z).norm(), 1e-8) << m.name() << ' ' << which;
      for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(m.gradient(i, z).norm(), 1e-8);
    }
    EXPECT_EQ(m.size(), 10u);
    EXPECT_TRUE(m.box().contains(m.minimizer("quad")));
    EXPECT_THROW(m.minimizer("other"), std::invalid_argument);
  }
}

TEST(QcGenerator, SharpAndFlatQuadraticBasins) {
  const auto ms = generate_qc_models(kSeed);
  auto top = [](const QcSumsModel& m) {
    return sym_eigen_desc(m.expected_hessian(QcSumsModel::quad_min())).values(0);
  };
  EXPECT_GE(top(ms[0]), 10.0 * top(ms[3]));
  EXPECT_GE(top(ms[2]), 10.0 * top(ms[1]));
}

TEST(QcGenerator, DeterministicAndSeedDependent) {
  const auto a = generate_qc_models(7);
  const auto b = generate_qc_models(7);
  const auto c = generate_qc_models(8);
  EXPECT_EQ(to_json(a[0]), to_json(b[0]));
  EXPECT_NE(to_json(a[0]), to_json(c[0]));
}

TEST(QcGenerator, JsonRoundTrip) {
  for (const auto& m : generate_qc_models(kSeed)) {
    const auto back = qc_model_from_json(to_json(m));
    EXPECT_EQ(to_json(back), to_json(m));
    const Vec x = (Vec(2) << 0.3, -2.0).finished();
    EXPECT_EQ(back.expected_value(x), m.expected_value(x));
  }
  EXPECT_THROW(qc_model_from_json({{"family", "st"}}), std::invalid_argument);
}

TEST(StComponent, WorkedValues) {
  const auto m = single_st(1.0, -2.0, 1.0, 1);
  const Vec zero = Vec::Zero(1);
  EXPECT_DOUBLE_EQ(m.value(0, zero), 0.0);
  EXPECT_DOUBLE_EQ(m.gradient(0, zero)(0), 0.5);
  EXPECT_DOUBLE_EQ(m.hessian_diagonal(0, zero)(0), -2.0);
  const Vec x = Vec::Constant(1, 1.5);
  EXPECT_NEAR(m.gradient(0, x)(0), fd_slope([&](double t) { return m.value(0, Vec::Constant(1, t)); }, 1.5), 1e-7);
  EXPECT_NEAR(m.hessian_diagonal(0, x)(0), fd_slope([&](double t) { return m.gradient(0, Vec::Constant(1, t))(0); }, 1.5),
              1e-6);
}

TEST(StComponent, ClassicMinimizer) {
  const auto roots = st_cubic_roots(1.0, -16.0, 5.0);
  EXPECT_NEAR(roots[0], -2.903534, 1e-6);
  EXPECT_NEAR(roots[0], st_grid_min(1.0, -16.0, 5.0, -5.0, 0.0), 1e-9);
  EXPECT_NEAR(roots[2], st_grid_min(1.0, -16.0, 5.0, 0.0, 5.0), 1e-9);
  EXPECT_THROW(st_cubic_roots(1.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(st_cubic_roots(0.0, -1.0, 0.0), std::invalid_argument);
}

TEST(StCatalog, SymmetricTieBreaksToNegativeRoot) {
  const StCatalog cat = single_st(1.0, -2.0, 0.0, 1).minimizers();
  EXPECT_NEAR(cat.lo(0), -1.0, 1e-14);
  EXPECT_NEAR(cat.hi(0), 1.0, 1e-14);
  EXPECT_EQ(cat.flattest(0), cat.lo(0));
  EXPECT_EQ(cat.sharpest(0), cat.lo(0));
}

TEST(StCatalog, TwoDimensionalClassic) {
  const auto m = single_st(1.0, -16.0, 5.0, 2);
  const StCatalog cat = m.minimizers();
  EXPECT_EQ(cat.count(), 4.0);
  const double lo = st_grid_min(1.0, -16.0, 5.0, -5.0, 0.0);
  const double hi = st_grid_min(1.0, -16.0, 5.0, 0.0, 5.0);
  for (const std::vector<bool>& sel : {std::vector<bool>{false, false}, {false, true}, {true, false}, {true, true}}) {
    const Vec x = cat.minimizer(sel);
    EXPECT_NEAR(x(0), sel[0] ? hi : lo, 1e-6);
    EXPECT_NEAR(x(1), sel[1] ? hi : lo, 1e-6);
    EXPECT_LE(m.expected_gradient(x).norm(), 1e-10);
    EXPECT_TRUE((cat.curvature(sel).array() > 0.0).all());
  }
  // The negative root lies farther from the origin, so the curvature 6 x^2 - 16 is larger there.
  EXPECT_EQ(cat.sharpest(0), cat.lo(0));
  EXPECT_EQ(cat.flattest(0), cat.hi(0));
  EXPECT_EQ(single_st(1.0, -16.0, 5.0, 10).minimizers().count(), 1024.0);
  EXPECT_THROW(cat.minimizer({true}), std::invalid_argument);
}

TEST(StModel, ValidationRejectsBadCoefficients) {
  EXPECT_THROW(single_st(0.0, -1.0, 0.0, 2), std::invalid_argument);
  EXPECT_THROW(single_st(1.0, 1.0, 0.0, 2), std::invalid_argument);
  EXPECT_THROW(single_st(1.0, -1.0, -1.0, 2), std::invalid_argument);
  EXPECT_THROW(StSumsModel("x", RowMat::Ones(1, 2), -RowMat::Ones(1, 2), RowMat::Zero(1, 2), {0.9}), std::invalid_argument);
}

TEST(StGenerator, ShapesAndMinimizers) {
  const auto ms = generate_st_models(kSeed);
  for (std::size_t idx = 0; idx < 3; ++idx) {
    const auto& m = ms[idx];
    EXPECT_EQ(m.dim(), kStModelSizes[idx].first);
    EXPECT_EQ(static_cast<Eigen::Index>(m.size()), kStModelSizes[idx].second);
    for (double w : m.probs()) EXPECT_DOUBLE_EQ(w, 1.0 / static_cast<double>(m.size()));
    const StCatalog cat = m.minimizers();
    for (const Vec& z : {cat.flattest, cat.sharpest}) {
      EXPECT_TRUE(m.box().contains(z));
      EXPECT_LE(m.expected_gradient(z).norm(), 1e-9 * (1.0 + m.max_component_gradient(z)));
      EXPECT_GT(m.max_component_gradient(z), 1e-3);
      const Vec h = m.expected_hessian_diagonal(z);
      EXPECT_TRUE((h.array() > 0.0).all());
      const SymEigen e = sym_eigen_desc(m.expected_hessian(z));
      Vec sorted = h;
      std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
      EXPECT_LE((e.values - sorted).norm(), 1e-10 * sorted(0));
    }
    EXPECT_LE(m.expected_hessian_diagonal(cat.flattest).sum(), m.expected_hessian_diagonal(cat.sharpest).sum());
  }
}

TEST(StGenerator, JsonRoundTripAndDeterminism) {
  const auto a = generate_st_model(3, 0);
  const auto b = generate_st_model(3, 0);
  EXPECT_EQ(a.c1(), b.c1());
  EXPECT_NE(a.c1(), generate_st_model(4, 0).c1());
  const auto back = st_model_from_json(to_json(a));
  EXPECT_EQ(back.c1(), a.c1());
  EXPECT_EQ(back.c2(), a.c2());
  EXPECT_EQ(back.c3(), a.c3());
  EXPECT_EQ(back.minimizer("flattest"), a.minimizer("flattest"));
}
