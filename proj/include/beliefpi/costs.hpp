#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"
#include "beliefpi/light_dark.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/models.hpp"

namespace beliefpi {

/// Quadratic tracking cost, Gaussian-bump obstacle penalties, control weight,
/// risk sensitivity theta and path integral temperature lambda.
/// Obstacles act on the first two state components (planar position).
template <typename ScalarT, int N, int L>
struct CostSpec {
  using Scalar = ScalarT;
  using State = Eigen::Matrix<Scalar, N, 1>;
  using StateMatrix = Eigen::Matrix<Scalar, N, N>;
  using ControlWeight = Eigen::Matrix<Scalar, L, L>;

  StateMatrix stateWeight = StateMatrix::Zero();
  State reference = State::Zero();
  std::vector<State> referenceTrajectory;  // optional; overrides `reference` per step
  ControlWeight controlWeight = ControlWeight::Identity();
  StateMatrix terminalWeight = StateMatrix::Zero();
  State terminalReference = State::Zero();

  std::vector<Obstacle> obstacles;
  double obstacleWeight = 0.0;
  double obstacleWidth = 1.0;  // bump std as a multiple of the radius
  bool terminalObstacles = false;

  double theta = 0.0;
  double lambda = 1.0;

  const State& referenceAt(int k) const {
    if (referenceTrajectory.empty()) return reference;
    return referenceTrajectory[std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)),
                                                     referenceTrajectory.size() - 1)];
  }

  void validate() const {
    if (!(lambda > 0)) throw ConfigError("cost: temperature lambda must be positive");
    if (!(theta >= 0)) throw ConfigError("cost: risk sensitivity theta must be non-negative");
    if (!(obstacleWeight >= 0)) throw ConfigError("cost: obstacle weight must be non-negative");
    if (!(obstacleWidth > 0)) throw ConfigError("cost: obstacle width must be positive");
    if (!obstacles.empty() && N < 2) throw ConfigError("cost: obstacles need a planar position");
    if (minEigenvalue(stateWeight) < -1e-12 || minEigenvalue(terminalWeight) < -1e-12) {
      throw ConfigError("cost: state weights must be PSD");
    }
    if (Eigen::LLT<ControlWeight>(controlWeight).info() != Eigen::Success) {
      throw ConfigError("cost: control weight must be SPD");
    }
  }
};

template <SystemModel Model>
using CostSpecFor = CostSpec<typename Model::Scalar, Model::kStateDim, Model::kControlDim>;

/// E[1/2 |x - ref|^2_Q] for x ~ N(mu, Sigma).
template <typename DM, typename DS, typename DQ, typename DR>
typename DM::Scalar expectedQuadraticCost(const Eigen::MatrixBase<DM>& mu, const Eigen::MatrixBase<DS>& sigma,
                                          const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DR>& ref) {
  const auto d = (mu - ref).eval();
  return 0.5 * d.dot(q * d) + 0.5 * (q * sigma).trace();
}

/// Var[1/2 |x - ref|^2_Q] = 1/2 tr((Q Sigma)^2) + d^T Q Sigma Q d.
template <typename DM, typename DS, typename DQ, typename DR>
typename DM::Scalar quadraticCostVariance(const Eigen::MatrixBase<DM>& mu, const Eigen::MatrixBase<DS>& sigma,
                                          const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DR>& ref) {
  const auto d = (mu - ref).eval();
  const auto qs = (q * sigma).eval();
  return 0.5 * (qs * qs).trace() + d.dot(qs * (q * d));
}

struct CostMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of w exp(-1/2 (x-o)^T S^-1 (x-o)) for x ~ N(mu, P):
///   E     = w   sqrt(det S / det(S + P))         exp(-1/2 e^T (S + P)^-1 e)
///   E[q^2] = w^2 sqrt(det(S/2) / det(S/2 + P))  exp(-1/2 e^T (S/2 + P)^-1 e)
template <int D>
CostMoments gaussianBumpMoments(const Eigen::Matrix<double, D, 1>& mu, const Eigen::Matrix<double, D, D>& p,
                                const Eigen::Matrix<double, D, 1>& center, const Eigen::Matrix<double, D, D>& s,
                                double weight) {
  using Mat = Eigen::Matrix<double, D, D>;
  const Eigen::Matrix<double, D, 1> e = mu - center;
  auto term = [&](const Mat& shape) {
    const Mat total = shape + p;
    Eigen::LDLT<Mat> ldlt(total);
    const double det = total.determinant();
    if (ldlt.info() != Eigen::Success || !(det > 0)) throw NumericalError("obstacle cost: S + P is singular");
    return std::sqrt(shape.determinant() / det) * std::exp(-0.5 * e.dot(ldlt.solve(e)));
  };
  CostMoments out;
  out.mean = weight * term(s);
  const double second = weight * weight * term(Mat(0.5 * s));
  out.variance = std::max(0.0, second - out.mean * out.mean);
  return out;
}

/// Bump with S = (radius * width)^2 I centred on the obstacle.
inline CostMoments obstacleCostMoments(const Eigen::Vector2d& mu, const Eigen::Matrix2d& p, const Obstacle& obstacle,
                                       double weight, double width) {
  if (!(width > 0)) throw ConfigError("obstacle cost: width must be positive");
  const double sd = obstacle.radius * width;
  return gaussianBumpMoments<2>(mu, p, obstacle.center, Eigen::Matrix2d(sd * sd * Eigen::Matrix2d::Identity()),
                                weight);
}

/// Obstacle penalty at a known position (zero covariance).
inline double obstaclePenalty(const Eigen::Vector2d& position, const std::vector<Obstacle>& obstacles, double weight,
                              double width) {
  double total = 0.0;
  for (const auto& o : obstacles) {
    const double sd = o.radius * width;
    total += weight * std::exp(-0.5 * (position - o.center).squaredNorm() / (sd * sd));
  }
  return total;
}

namespace detail {

template <typename Spec, typename DM, typename DS>
double reducedCost(const Spec& spec, const Eigen::MatrixBase<DM>& mu, const Eigen::MatrixBase<DS>& sigma,
                   const typename Spec::StateMatrix& weight, const typename Spec::State& ref, bool withObstacles) {
  double mean = expectedQuadraticCost(mu, sigma, weight, ref);
  double variance = spec.theta > 0 ? quadraticCostVariance(mu, sigma, weight, ref) : 0.0;
  if constexpr (DM::RowsAtCompileTime >= 2 || DM::RowsAtCompileTime == Eigen::Dynamic) {
    if (withObstacles && spec.obstacleWeight > 0) {
      const Eigen::Vector2d pos = mu.template head<2>().template cast<double>();
      const Eigen::Matrix2d p = sigma.template topLeftCorner<2, 2>().template cast<double>();
      for (const auto& o : spec.obstacles) {
        const auto m = obstacleCostMoments(pos, p, o, spec.obstacleWeight, spec.obstacleWidth);
        mean += m.mean;
        variance += m.variance;
      }
    }
  }
  return mean + 0.5 * spec.theta * variance;
}

}  // namespace detail

/// q_RS(mu) = E[q] + theta/2 Var[q] under N(mu, Sigma_k). The covariance
/// between the quadratic and obstacle terms is not included in Var.
template <typename Spec, typename DM, typename DS>
double reducedRunningCost(const Eigen::MatrixBase<DM>& mu, const Eigen::MatrixBase<DS>& sigma, const Spec& spec,
                          int k = 0) {
  return detail::reducedCost(spec, mu, sigma, spec.stateWeight, spec.referenceAt(k), true);
}

template <typename Spec, typename DM, typename DS>
double reducedTerminalCost(const Eigen::MatrixBase<DM>& mu, const Eigen::MatrixBase<DS>& sigma, const Spec& spec) {
  return detail::reducedCost(spec, mu, sigma, spec.terminalWeight, spec.terminalReference, spec.terminalObstacles);
}

/// Reduced costs with every covariance-dependent quantity folded in ahead of
/// time, so a rollout step costs one quadratic form plus a few exponentials:
///   q_k(mu) = d^T W_k d + c_k + sum_j (E_j + theta/2 Var_j),
///   W_k = 1/2 Q + theta/2 Q Sigma_k Q,   c_k = 1/2 tr(Q Sigma_k) + theta/4 tr((Q Sigma_k)^2).
template <typename Scalar, int N>
class ReducedCostTable {
 public:
  using State = Eigen::Matrix<Scalar, N, 1>;
  using StateMatrix = Eigen::Matrix<Scalar, N, N>;

  ReducedCostTable() = default;

  /// `covariances` holds Sigma_0..Sigma_H; the last one feeds the terminal cost.
  template <int L>
  ReducedCostTable(const CostSpec<Scalar, N, L>& spec, std::span<const StateMatrix> covariances, double theta)
      : theta_(theta) {
    if (covariances.size() < 2) throw ConfigError("cost table: need at least one running step");
    const int horizon = static_cast<int>(covariances.size()) - 1;
    knots_.reserve(horizon);
    for (int k = 0; k < horizon; ++k) {
      knots_.push_back(makeKnot(spec.stateWeight, spec.referenceAt(k), covariances[k], spec, true));
    }
    terminal_ = makeKnot(spec.terminalWeight, spec.terminalReference, covariances.back(), spec,
                         spec.terminalObstacles);
  }

  /// Belief-space table: the spec's theta with the scheduled covariances.
  template <int L>
  static ReducedCostTable belief(const CostSpec<Scalar, N, L>& spec, std::span<const StateMatrix> covariances) {
    return ReducedCostTable(spec, covariances, spec.theta);
  }

  /// Certainty-equivalent table: zero covariance and theta = 0.
  template <int L>
  static ReducedCostTable certaintyEquivalent(const CostSpec<Scalar, N, L>& spec, int horizon) {
    std::vector<StateMatrix> zeros(horizon + 1, StateMatrix::Zero());
    return ReducedCostTable(spec, std::span<const StateMatrix>(zeros), 0.0);
  }

  int horizon() const { return static_cast<int>(knots_.size()); }
  double theta() const { return theta_; }

  double running(int k, const State& mu) const { return evaluate(knots_[k], mu); }
  double terminal(const State& mu) const { return evaluate(terminal_, mu); }

  /// Gradient and Hessian in mu; used by the iLQG baseline.
  void runningDerivatives(int k, const State& mu, State& grad, StateMatrix& hess) const {
    derivatives(knots_[k], mu, grad, hess);
  }
  void terminalDerivatives(const State& mu, State& grad, StateMatrix& hess) const {
    derivatives(terminal_, mu, grad, hess);
  }

 private:
  struct Bump {
    Eigen::Vector2d center;
    Eigen::Matrix2d meanPrecision;  // (S + P)^-1
    double meanScale = 0;           // w sqrt(det S / det(S+P))
    Eigen::Matrix2d secondPrecision;
    double secondScale = 0;
  };

  struct Knot {
    StateMatrix weight;
    State reference;
    double constant = 0;
    std::vector<Bump> bumps;
  };

  template <int L>
  Knot makeKnot(const StateMatrix& q, const State& ref, const StateMatrix& sigma, const CostSpec<Scalar, N, L>& spec,
                bool withObstacles) const {
    Knot knot;
    const StateMatrix qs = q * sigma;
    knot.weight = 0.5 * q + 0.5 * theta_ * (qs * q);
    knot.reference = ref;
    knot.constant = 0.5 * qs.trace() + 0.25 * theta_ * (qs * qs).trace();
    if constexpr (N >= 2) {
      if (withObstacles && spec.obstacleWeight > 0) {
        const Eigen::Matrix2d p = sigma.template topLeftCorner<2, 2>().template cast<double>();
        for (const auto& o : spec.obstacles) {
          const double sd = o.radius * spec.obstacleWidth;
          const Eigen::Matrix2d s = sd * sd * Eigen::Matrix2d::Identity();
          const Eigen::Matrix2d total = s + p;
          const Eigen::Matrix2d half = 0.5 * s + p;
          Bump b;
          b.center = o.center;
          b.meanPrecision = total.inverse();
          b.meanScale = spec.obstacleWeight * std::sqrt(s.determinant() / total.determinant());
          b.secondPrecision = half.inverse();
          b.secondScale = spec.obstacleWeight * spec.obstacleWeight *
                          std::sqrt(Eigen::Matrix2d(0.5 * s).determinant() / half.determinant());
          knot.bumps.push_back(b);
        }
      }
    }
    return knot;
  }

  double evaluate(const Knot& knot, const State& mu) const {
    const State d = mu - knot.reference;
    double value = d.dot(knot.weight * d) + knot.constant;
    if constexpr (N >= 2) {
      for (const auto& b : knot.bumps) {
        const Eigen::Vector2d e = mu.template head<2>().template cast<double>() - b.center;
        const double mean = b.meanScale * std::exp(-0.5 * e.dot(b.meanPrecision * e));
        value += mean;
        if (theta_ > 0) {
          const double second = b.secondScale * std::exp(-0.5 * e.dot(b.secondPrecision * e));
          value += 0.5 * theta_ * std::max(0.0, second - mean * mean);
        }
      }
    }
    return value;
  }

  void derivatives(const Knot& knot, const State& mu, State& grad, StateMatrix& hess) const {
    const State d = mu - knot.reference;
    grad = 2.0 * knot.weight * d;
    hess = 2.0 * knot.weight;
    if constexpr (N >= 2) {
      for (const auto& b : knot.bumps) {
        const Eigen::Vector2d e = mu.template head<2>().template cast<double>() - b.center;
        const Eigen::Vector2d ae = b.meanPrecision * e;
        const double mean = b.meanScale * std::exp(-0.5 * e.dot(ae));
        Eigen::Vector2d g = -mean * ae;
        Eigen::Matrix2d h = mean * (ae * ae.transpose() - b.meanPrecision);
        if (theta_ > 0) {
          const Eigen::Vector2d se = b.secondPrecision * e;
          const double second = b.secondScale * std::exp(-0.5 * e.dot(se));
          const Eigen::Vector2d gMean = g;
          const Eigen::Matrix2d hMean = h;
          g += 0.5 * theta_ * (-second * se - 2.0 * mean * gMean);
          h += 0.5 * theta_ *
               (second * (se * se.transpose() - b.secondPrecision) -
                2.0 * (gMean * gMean.transpose() + mean * hMean));
        }
        grad.template head<2>() += g.template cast<Scalar>();
        hess.template topLeftCorner<2, 2>() += h.template cast<Scalar>();
      }
    }
  }

  std::vector<Knot> knots_;
  Knot terminal_;
  double theta_ = 0;
};

}  // namespace beliefpi
