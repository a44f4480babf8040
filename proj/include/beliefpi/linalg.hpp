#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"

namespace beliefpi {

template <typename Derived>
auto symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (typename Derived::Scalar(0.5) * (m + m.transpose())).eval();
}

/// n x r factor with r decided at runtime; storage is fixed when n is.
template <typename Scalar, int N>
using FactorMatrix = Eigen::Matrix<Scalar, N, Eigen::Dynamic, Eigen::ColMajor, N, N>;

template <typename Scalar, int N>
struct PsdFactor {
  FactorMatrix<Scalar, N> factor;
  int rank = 0;
};

/// Factors a symmetric PSD matrix as D = L L^T with L = V_r diag(sqrt(eig_r)),
/// keeping eigenvalues above tol * max(eig_max, 1). Rank-deficient inputs give
/// a thin L; the zero matrix gives an empty one.
template <typename Derived>
PsdFactor<typename Derived::Scalar, Derived::RowsAtCompileTime> psdFactor(
    const Eigen::MatrixBase<Derived>& d, typename Derived::Scalar tol = kRankTolerance) {
  using Scalar = typename Derived::Scalar;
  constexpr int N = Derived::RowsAtCompileTime;
  using Square = Eigen::Matrix<Scalar, N, N>;

  if (d.rows() != d.cols()) throw ConfigError("psdFactor: matrix is not square");
  const Scalar scale = std::max<Scalar>(d.cwiseAbs().maxCoeff(), Scalar(1));
  if ((d - d.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw NumericalError("psdFactor: matrix is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Square> eig(Square(symmetrize(d)));
  const auto& values = eig.eigenvalues();
  const Scalar largest = std::max<Scalar>(values.maxCoeff(), Scalar(1));
  if (values.minCoeff() < -tol * largest) {
    throw NumericalError("psdFactor: matrix is indefinite (min eigenvalue " +
                         std::to_string(static_cast<double>(values.minCoeff())) + ")");
  }

  PsdFactor<Scalar, N> out;
  const Scalar cutoff = tol * largest;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > cutoff) ++out.rank;
  }
  out.factor.resize(d.rows(), out.rank);
  int col = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > cutoff) out.factor.col(col++) = eig.eigenvectors().col(i) * std::sqrt(values(i));
  }
  return out;
}

/// Numerical rank counting singular values above tol * sigma_max.
template <typename Derived>
int numericalRank(const Eigen::MatrixBase<Derived>& m, double tol = kRankTolerance) {
  if (m.size() == 0) return 0;
  using Dense = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::JacobiSVD<Dense> svd{Dense(m)};
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++r;
  }
  return r;
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>
pseudoInverse(const Eigen::MatrixBase<Derived>& m, double tol = kRankTolerance) {
  using Scalar = typename Derived::Scalar;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(m.derived(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Matrix<Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime> out =
      Eigen::Matrix<Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>::Zero(m.cols(),
                                                                                          m.rows());
  if (s.size() == 0 || s(0) <= 0) return out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) {
      out += svd.matrixV().col(i) * (Scalar(1) / s(i)) * svd.matrixU().col(i).transpose();
    }
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar minEigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Square = Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime,
                               Derived::ColsAtCompileTime>;
  Eigen::SelfAdjointEigenSolver<Square> eig(Square(symmetrize(m)), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace beliefpi
