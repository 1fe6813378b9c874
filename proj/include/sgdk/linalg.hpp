#pragma once
/// Dense linear-algebra helpers shared by the quadratic and mechanism modules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace sgdk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default relative tolerance below which eigenvalues are treated as zero.
inline constexpr double kDefaultRankTol = 1e-10;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
struct SymEigen {
  Vec values;   ///< descending
  Mat vectors;  ///< column i pairs with values(i)
};

inline SymEigen sym_eigen_desc(const Mat& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_eigen_desc: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Mat> solver(a);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sym_eigen_desc: eigensolver failed");
  const Eigen::Index n = a.rows();
  SymEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Largest absolute entry of a - a'.
inline double max_asymmetry(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Orthonormal basis of the eigenspace of a symmetric matrix whose eigenvalues
/// exceed rank_tol times the largest eigenvalue. Negative eigenvalues are never
/// included; they are counted in n_negative.
struct PositiveRange {
  Mat basis;     ///< p x m, columns are eigenvectors
  Vec lambdas;   ///< m values, descending, all positive
  int n_negative = 0;
  [[nodiscard]] Eigen::Index rank() const { return lambdas.size(); }
};

inline PositiveRange positive_range(const Mat& a, double rank_tol = kDefaultRankTol) {
  const SymEigen e = sym_eigen_desc(a);
  const Eigen::Index n = e.values.size();
  PositiveRange out;
  const double top = n > 0 ? e.values(0) : 0.0;
  const double cut = top > 0.0 ? rank_tol * top : 0.0;
  Eigen::Index m = 0;
  while (m < n && top > 0.0 && e.values(m) > cut) ++m;
  out.basis = e.vectors.leftCols(m);
  out.lambdas = e.values.head(m);
  for (Eigen::Index i = m; i < n; ++i) {
    if (e.values(i) < -cut) ++out.n_negative;
  }
  return out;
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, discarding eigenvalues
/// with magnitude below rank_tol times the largest magnitude.
inline Mat pinv_sym(const Mat& a, double rank_tol = kDefaultRankTol) {
  const SymEigen e = sym_eigen_desc(a);
  const double top = e.values.size() > 0 ? e.values.cwiseAbs().maxCoeff() : 0.0;
  Mat out = Mat::Zero(a.rows(), a.cols());
  if (top == 0.0) return out;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    const double v = e.values(i);
    if (std::abs(v) > rank_tol * top) out += (1.0 / v) * e.vectors.col(i) * e.vectors.col(i).transpose();
  }
  return out;
}

/// The whitened matrix B = L^{-1/2} U' M U L^{-1/2} on a positive range.
inline Mat whitened(const Mat& m, const PositiveRange& range) {
  const Vec inv_sqrt = range.lambdas.array().rsqrt();
  const Mat w = range.basis * inv_sqrt.asDiagonal();
  Mat b = w.transpose() * m * w;
  return 0.5 * (b + b.transpose());
}

/// Smallest and largest eigenvalue of the whitened matrix (unclamped).
inline std::pair<double, double> whitened_extremes(const Mat& m, const PositiveRange& range) {
  if (range.rank() == 0) throw std::invalid_argument("whitened_extremes: empty range");
  const Mat b = whitened(m, range);
  Eigen::SelfAdjointEigenSolver<Mat> solver(b, Eigen::EigenvaluesOnly);
  return {solver.eigenvalues().minCoeff(), solver.eigenvalues().maxCoeff()};
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace sgdk
