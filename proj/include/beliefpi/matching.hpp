#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/schedule.hpp"

namespace beliefpi {

namespace detail {

// Each block is scaled to unit spectral norm before concatenation so a small
// diffusion next to a large control matrix still registers in the joint rank.
template <typename DD, typename DG>
Eigen::MatrixXd stackedRangeBasis(const Eigen::MatrixBase<DD>& d, const Eigen::MatrixBase<DG>& g, double tol) {
  const auto root = psdFactor(d.template cast<double>().eval(), tol).factor;
  Eigen::MatrixXd gd = g.template cast<double>();
  Eigen::MatrixXd ld = root;
  auto normalize = [](Eigen::MatrixXd& m) {
    if (m.size() == 0) return;
    const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
    if (s > 0) m /= s;
  };
  normalize(gd);
  normalize(ld);
  Eigen::MatrixXd stacked(gd.rows(), gd.cols() + ld.cols());
  stacked << gd, ld;
  return stacked;
}

}  // namespace detail

/// range(D) subset of range(G): rank([G | D^{1/2}]) == rank(G).
template <typename DD, typename DG>
bool checkRangeInclusion(const Eigen::MatrixBase<DD>& d, const Eigen::MatrixBase<DG>& g,
                         double tol = kRankTolerance) {
  return numericalRank(detail::stackedRangeBasis(d, g, tol), tol) == numericalRank(g, tol);
}

/// range(D) == range(G): rank(D) == rank(G) == rank([G | D^{1/2}]).
template <typename DD, typename DG>
bool checkRangeEquality(const Eigen::MatrixBase<DD>& d, const Eigen::MatrixBase<DG>& g,
                        double tol = kRankTolerance) {
  const int rg = numericalRank(g, tol);
  const int rd = psdFactor(d.template cast<double>().eval(), tol).rank;
  return rd == rg && numericalRank(detail::stackedRangeBasis(d, g, tol), tol) == rg;
}

/// Builds an SPD R^{-1} with lambda G R^{-1} G^T = D: the solve on range(G^T)
/// comes from the SVD of G, and ker(G) gets kernelWeight * I.
template <typename DD, typename DG>
Eigen::Matrix<typename DG::Scalar, DG::ColsAtCompileTime, DG::ColsAtCompileTime> constructRInverse(
    const Eigen::MatrixBase<DD>& d, const Eigen::MatrixBase<DG>& g, double lambda, double kernelWeight = 1.0,
    double tol = kRankTolerance) {
  using Scalar = typename DG::Scalar;
  constexpr int L = DG::ColsAtCompileTime;
  using Out = Eigen::Matrix<Scalar, L, L>;
  if (!(lambda > 0)) throw ConfigError("constructRInverse: lambda must be positive");
  if (!(kernelWeight > 0)) throw ConfigError("constructRInverse: kernel weight must be positive");
  if (!checkRangeEquality(d, g, tol)) {
    throw InfeasibleMatching("constructRInverse: no SPD R satisfies D = lambda G R^-1 G^T unless range(D) == range(G)");
  }

  using Plain = typename DG::PlainObject;
  Eigen::JacobiSVD<Plain> svd(g.derived(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const int cols = static_cast<int>(g.cols());
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++r;
  }
  const auto u = svd.matrixU().leftCols(r);
  const auto v = svd.matrixV().leftCols(r);
  const Eigen::VectorXd inv = s.head(r).cwiseInverse().template cast<double>();
  // G^+ = V S^-1 U^T, W = G^+ D G^+^T / lambda.
  const Eigen::MatrixXd gPlus = v.template cast<double>() * inv.asDiagonal() * u.transpose().template cast<double>();
  Eigen::MatrixXd w = gPlus * d.template cast<double>() * gPlus.transpose() / lambda;
  const Eigen::MatrixXd vd = v.template cast<double>();
  const Eigen::MatrixXd kernelProjector = Eigen::MatrixXd::Identity(cols, cols) - vd * vd.transpose();
  Out out = symmetrize(Eigen::MatrixXd(w + kernelWeight * kernelProjector)).template cast<Scalar>();
  return out;
}

struct ResidualFit {
  double residual = 0.0;  // relative Frobenius mismatch at the best lambda
  double lambda = 0.0;
  bool degenerate = false;  // ||D||_F == 0
};

/// min over lambda in [lo, hi] of ||D - lambda G R^{-1} G^T||_F / max(||D||_F, floor),
/// located by golden-section search.
template <typename DD, typename DG, typename DR>
ResidualFit matchingResidual(const Eigen::MatrixBase<DD>& d, const Eigen::MatrixBase<DG>& g,
                             const Eigen::MatrixBase<DR>& r, std::pair<double, double> lambdaRange,
                             double floor = 1e-300) {
  const auto [lo, hi] = lambdaRange;
  if (!(lo > 0) || !(hi >= lo)) throw ConfigError("matchingResidual: lambda range must be positive and ordered");
  const Eigen::MatrixXd dd = d.template cast<double>();
  const double dNorm = dd.norm();
  if (dNorm == 0.0) return {0.0, 0.5 * (lo + hi), true};

  Eigen::LLT<Eigen::MatrixXd> llt(r.template cast<double>());
  if (llt.info() != Eigen::Success) throw NumericalError("matchingResidual: R is not SPD");
  const Eigen::MatrixXd gd = g.template cast<double>();
  const Eigen::MatrixXd authority = gd * llt.solve(gd.transpose());
  const double denom = std::max(dNorm, floor);
  auto objective = [&](double lambda) { return (dd - lambda * authority).norm() / denom; };

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  while (b - a > 1e-12 * std::max(std::abs(a) + std::abs(b), 1e-300)) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = objective(x2);
    }
  }
  ResidualFit best{objective(0.5 * (a + b)), 0.5 * (a + b), false};
  for (double edge : {lo, hi}) {
    const double f = objective(edge);
    if (f < best.residual) best = {f, edge, false};
  }
  return best;
}

struct MatchingStep {
  bool inclusionHolds = false;
  bool equalityHolds = false;
  double residual = 0.0;
  double lambda = 0.0;
  bool degenerate = false;
};

struct MatchingReport {
  std::vector<MatchingStep> steps;
  double worstResidual = 0.0;  // max_k residual_k

  bool allEqual() const {
    return std::all_of(steps.begin(), steps.end(), [](const MatchingStep& s) { return s.equalityHolds; });
  }
};

/// Per-knot matching diagnostics of D_k against G_k R^{-1} G_k^T.
template <SystemModel Model>
MatchingReport matchingReport(const BeliefSchedule<Model>& schedule, const typename Model::ControlWeight& r,
                              std::pair<double, double> lambdaRange, double tol = kRankTolerance) {
  MatchingReport report;
  report.steps.reserve(schedule.steps.size());
  for (const auto& step : schedule.steps) {
    MatchingStep m;
    m.inclusionHolds = checkRangeInclusion(step.diffusion, step.controlMatrix, tol);
    m.equalityHolds = checkRangeEquality(step.diffusion, step.controlMatrix, tol);
    const auto fit = matchingResidual(step.diffusion, step.controlMatrix, r, lambdaRange);
    m.residual = fit.residual;
    m.lambda = fit.lambda;
    m.degenerate = fit.degenerate;
    report.worstResidual = std::max(report.worstResidual, m.residual);
    report.steps.push_back(m);
  }
  return report;
}

inline void writeMatchingCsv(std::ostream& os, const MatchingReport& report) {
  os << "k,inclusion,equality,residual,lambda,degenerate\n";
  const auto precision = os.precision(17);
  for (std::size_t k = 0; k < report.steps.size(); ++k) {
    const auto& s = report.steps[k];
    os << k << ',' << s.inclusionHolds << ',' << s.equalityHolds << ',' << s.residual << ',' << s.lambda << ','
       << s.degenerate << '\n';
  }
  os.precision(precision);
}

}  // namespace beliefpi
