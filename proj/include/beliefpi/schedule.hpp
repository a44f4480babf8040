#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "beliefpi/common.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/models.hpp"

namespace beliefpi {

/// Exact covariance flow over `h` for frozen A, Q and S = C^T Ro^-1 C.
/// With Sigma = Y X^-1 the Riccati equation becomes the linear system
///   d/dt [X; Y] = [-A^T  S; Q  A] [X; Y],
/// so one step is a matrix exponential followed by a solve. The map is
/// monotone in the Loewner order up to roundoff.
template <typename Scalar, int N>
class RiccatiFlow {
 public:
  using StateMatrix = Eigen::Matrix<Scalar, N, N>;

  RiccatiFlow(const StateMatrix& a, const StateMatrix& q, const StateMatrix& s, Scalar h) {
    Eigen::Matrix<Scalar, 2 * N, 2 * N> hamiltonian;
    hamiltonian << -a.transpose(), s, q, a;
    transition_ = (hamiltonian * h).exp();
  }

  StateMatrix operator()(const StateMatrix& sigma) const {
    const StateMatrix x = transition_.template topLeftCorner<N, N>() + transition_.template topRightCorner<N, N>() * sigma;
    const StateMatrix y =
        transition_.template bottomLeftCorner<N, N>() + transition_.template bottomRightCorner<N, N>() * sigma;
    // Sigma+ = Y X^-1, computed as (X^-T Y^T)^T.
    const StateMatrix next = x.transpose().partialPivLu().solve(y.transpose()).transpose();
    return symmetrize(next);
  }

 private:
  Eigen::Matrix<Scalar, 2 * N, 2 * N> transition_;
};

/// One knot of the deterministic covariance / gain schedule.
template <SystemModel Model>
struct ScheduleStep {
  using Scalar = typename Model::Scalar;

  typename Model::State nominal;
  typename Model::StateMatrix covariance;  // Sigma_k
  typename Model::GainMatrix gain;         // K_k = Sigma C^T Ro^{-1}
  typename Model::StateMatrix diffusion;   // D_k: mean of K Ro K^T over [t_k, t_k + dt]; point value at k = H
  FactorMatrix<Scalar, Model::kStateDim> factor;  // L_k, D_k = L L^T
  int rank = 0;
  typename Model::ControlMatrix controlMatrix;  // G(nominal)
};

template <SystemModel Model>
struct BeliefSchedule {
  typename Model::Scalar dt = 0;
  std::vector<ScheduleStep<Model>> steps;  // k = 0..H

  int horizon() const { return static_cast<int>(steps.size()) - 1; }
};

template <SystemModel Model>
void setDiffusion(ScheduleStep<Model>& step, const typename Model::StateMatrix& d, double rankTol) {
  step.diffusion = d;
  auto factor = psdFactor(step.diffusion, rankTol);
  step.factor = std::move(factor.factor);
  step.rank = factor.rank;
}

/// Fills K, the point value of D, L and r at the knot's nominal state from its covariance.
template <SystemModel Model>
void completeStep(const Model& model, ScheduleStep<Model>& step, double rankTol = kRankTolerance) {
  const typename Model::ObsJacobian c = model.observationJacobian(step.nominal);
  const typename Model::ObsMatrix ro = observationCovariance(model, step.nominal);
  Eigen::LLT<typename Model::ObsMatrix> llt(ro);
  if (llt.info() != Eigen::Success) throw NumericalError("schedule: observation covariance is singular");
  const Eigen::Matrix<typename Model::Scalar, Model::kObsDim, Model::kStateDim> cs = c * step.covariance;
  step.gain = llt.solve(cs).transpose();
  setDiffusion(step, typename Model::StateMatrix(symmetrize(cs.transpose() * llt.solve(cs))), rankTol);
  step.controlMatrix = model.controlMatrix(step.nominal);
}

/// Propagates the covariance along a nominal mean trajectory with the exact
/// flow of each step's frozen linearization (Jacobians and observation noise
/// taken at the step's nominal state). An empty `nominalControls` means zero
/// controls.
///
/// The diffusion of knot k is the time average of Sigma S Sigma over the
/// step (composite Simpson on the substeps), which is the covariance rate of
/// the belief-mean increment over that step. Right after a sharp measurement
/// the point value at t_k can be far below it.
inline constexpr int kMaxRiccatiSubsteps = 4096;

template <SystemModel Model>
BeliefSchedule<Model> propagateSchedule(const Model& model, const typename Model::State& mean0,
                                        std::span<const typename Model::Control> nominalControls,
                                        const typename Model::StateMatrix& sigma0, double dt, int horizon,
                                        double rankTol = kRankTolerance) {
  using StateMatrix = typename Model::StateMatrix;
  if (horizon < 1) throw ConfigError("propagateSchedule: horizon must be at least 1");
  if (!(dt > 0)) throw ConfigError("propagateSchedule: dt must be positive");
  if (!nominalControls.empty() && static_cast<int>(nominalControls.size()) < horizon) {
    throw ConfigError("propagateSchedule: nominal control sequence shorter than the horizon");
  }
  if (!sigma0.allFinite() || (sigma0 - sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + sigma0.norm()) ||
      minEigenvalue(sigma0) < -1e-8) {
    throw ConfigError("propagateSchedule: initial covariance must be symmetric PSD");
  }

  const StateMatrix q = processCovariance(model);
  BeliefSchedule<Model> out;
  out.dt = dt;
  out.steps.resize(horizon + 1);
  out.steps[0].nominal = mean0;
  out.steps[0].covariance = symmetrize(sigma0);

  for (int k = 0; k <= horizon; ++k) {
    auto& step = out.steps[k];
    completeStep(model, step, rankTol);
    if (k == horizon) break;

    const StateMatrix a = model.driftJacobian(step.nominal);
    const auto c = model.observationJacobian(step.nominal);
    const auto ro = observationCovariance(model, step.nominal);
    const auto roLlt = ro.llt();
    if (roLlt.info() != Eigen::Success) throw NumericalError("propagateSchedule: observation covariance is singular", k);
    const StateMatrix info = c.transpose() * roLlt.solve(c);
    // Substeps bound h * |Hamiltonian| so the transition stays well conditioned in well-lit regions.
    const double scale = a.norm() + q.norm() + info.norm();
    const int substeps = std::clamp(static_cast<int>(std::ceil(dt * scale)), 1, kMaxRiccatiSubsteps);
    const RiccatiFlow<typename Model::Scalar, Model::kStateDim> half(a, q, info, dt / (2 * substeps));
    auto rate = [&](const StateMatrix& m) { return StateMatrix(m * info * m); };
    StateMatrix s = step.covariance;
    StateMatrix mean = StateMatrix::Zero();
    for (int i = 0; i < substeps; ++i) {
      const StateMatrix mid = half(s);
      const StateMatrix end = half(mid);
      mean += rate(s) + 4.0 * rate(mid) + rate(end);
      s = end;
    }
    setDiffusion(step, StateMatrix(symmetrize(mean / (6.0 * substeps))), rankTol);
    auto& next = out.steps[k + 1];
    next.covariance = s;
    if (!next.covariance.allFinite() || minEigenvalue(next.covariance) < -1e-8) {
      throw NumericalError("propagateSchedule: covariance lost positive semidefiniteness", k + 1);
    }

    typename Model::State velocity = model.drift(step.nominal);
    if (!nominalControls.empty()) velocity += step.controlMatrix * nominalControls[k];
    next.nominal = step.nominal + velocity * dt;
  }
  return out;
}

/// CSV rows `k,s_00,s_01,...,rank` with Sigma_k flattened row-major.
template <SystemModel Model>
void writeScheduleCsv(std::ostream& os, const BeliefSchedule<Model>& schedule) {
  constexpr int n = Model::kStateDim;
  os << "k";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) os << ",sigma_" << i << '_' << j;
  os << ",rank\n";
  const auto precision = os.precision(17);
  for (std::size_t k = 0; k < schedule.steps.size(); ++k) {
    os << k;
    const auto& s = schedule.steps[k].covariance;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) os << ',' << s(i, j);
    os << ',' << schedule.steps[k].rank << '\n';
  }
  os.precision(precision);
}

}  // namespace beliefpi
