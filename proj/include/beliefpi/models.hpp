#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"

namespace beliefpi {

/// Compile-time shapes of a partially observed control-affine system
///   dx = f(x) dt + G(x) u dt + H dw,   dy = c(x) dt + sigma_o(x) dv.
template <typename ScalarT, int N, int L, int P, int M>
struct ModelTypes {
  using Scalar = ScalarT;
  static constexpr int kStateDim = N;
  static constexpr int kControlDim = L;
  static constexpr int kObsDim = P;
  static constexpr int kNoiseDim = M;

  using State = Eigen::Matrix<Scalar, N, 1>;
  using Control = Eigen::Matrix<Scalar, L, 1>;
  using Observation = Eigen::Matrix<Scalar, P, 1>;
  using StateMatrix = Eigen::Matrix<Scalar, N, N>;
  using ControlMatrix = Eigen::Matrix<Scalar, N, L>;
  using ObsJacobian = Eigen::Matrix<Scalar, P, N>;
  using ObsMatrix = Eigen::Matrix<Scalar, P, P>;
  using GainMatrix = Eigen::Matrix<Scalar, N, P>;
  using NoiseChannel = Eigen::Matrix<Scalar, N, M>;
  using ControlWeight = Eigen::Matrix<Scalar, L, L>;
};

template <typename T>
concept SystemModel = requires(const T& m, const typename T::State& x) {
  typename T::Scalar;
  { m.drift(x) } -> std::convertible_to<typename T::State>;
  { m.controlMatrix(x) } -> std::convertible_to<typename T::ControlMatrix>;
  { m.observation(x) } -> std::convertible_to<typename T::Observation>;
  { m.driftJacobian(x) } -> std::convertible_to<typename T::StateMatrix>;
  { m.observationJacobian(x) } -> std::convertible_to<typename T::ObsJacobian>;
  { m.observationNoise(x) } -> std::convertible_to<typename T::ObsMatrix>;
  { m.processNoiseChannel() } -> std::convertible_to<typename T::NoiseChannel>;
};

/// Q = H H^T.
template <SystemModel Model>
typename Model::StateMatrix processCovariance(const Model& model) {
  const typename Model::NoiseChannel h = model.processNoiseChannel();
  return h * h.transpose();
}

/// R_o(x) = sigma_o(x) sigma_o(x)^T.
template <SystemModel Model>
typename Model::ObsMatrix observationCovariance(const Model& model, const typename Model::State& x) {
  const typename Model::ObsMatrix s = model.observationNoise(x);
  return s * s.transpose();
}

template <SystemModel Model>
struct ModelEvaluation {
  typename Model::State drift;
  typename Model::ControlMatrix controlMatrix;
  typename Model::Observation observation;
  typename Model::StateMatrix driftJacobian;
  typename Model::ObsJacobian observationJacobian;
  typename Model::ObsMatrix observationNoise;
};

template <SystemModel Model>
ModelEvaluation<Model> evalModel(const Model& model, const typename Model::State& x) {
  if (!x.allFinite()) throw ConfigError("evalModel: state is not finite");
  ModelEvaluation<Model> out{model.drift(x),          model.controlMatrix(x),
                             model.observation(x),    model.driftJacobian(x),
                             model.observationJacobian(x), model.observationNoise(x)};
  if (!out.drift.allFinite() || !out.controlMatrix.allFinite() || !out.observation.allFinite() ||
      !out.driftJacobian.allFinite() || !out.observationJacobian.allFinite() ||
      !out.observationNoise.allFinite()) {
    throw NumericalError("evalModel: model produced non-finite output");
  }
  return out;
}

/// Runtime-sized entry point (config files, CLI); rejects a wrong dimension.
template <SystemModel Model>
ModelEvaluation<Model> evalModel(const Model& model, const Eigen::VectorXd& x) {
  if (x.size() != Model::kStateDim) {
    throw ConfigError("evalModel: state has dimension " + std::to_string(x.size()) + ", model expects " +
                      std::to_string(Model::kStateDim));
  }
  return evalModel(model, typename Model::State(x.template cast<typename Model::Scalar>()));
}

/// Checks c(x2) - c(x1) = C(x0) (x2 - x1) over every probe pair, with x0 the
/// first probe point, and that the Jacobian is the same at every probe point.
/// A non-affine observation map means Gaussian belief-space path integral
/// control is only approximate; that case is reported through warn().
template <SystemModel Model>
bool checkAffineObservation(const Model& model,
                            std::span<const std::pair<typename Model::State, typename Model::State>> probes,
                            double tol = 1e-9) {
  if (probes.empty()) return true;
  const typename Model::ObsJacobian c0 = model.observationJacobian(probes.front().first);
  const double scale = std::max(1.0, static_cast<double>(c0.cwiseAbs().maxCoeff()));
  bool affine = true;
  for (const auto& [x1, x2] : probes) {
    const typename Model::Observation secant = model.observation(x2) - model.observation(x1);
    const typename Model::Observation tangent = c0 * (x2 - x1);
    const double dist = std::max(1.0, static_cast<double>((x2 - x1).cwiseAbs().maxCoeff()));
    if ((secant - tangent).cwiseAbs().maxCoeff() > tol * scale * dist) affine = false;
    if ((model.observationJacobian(x1) - c0).cwiseAbs().maxCoeff() > tol * scale ||
        (model.observationJacobian(x2) - c0).cwiseAbs().maxCoeff() > tol * scale) {
      affine = false;
    }
  }
  if (!affine) {
    warn("observation map is not affine: the Gaussian belief-space matching condition cannot hold "
         "exactly, path integral weights are approximate");
  }
  return affine;
}

/// Linear time-invariant model: f = A x, G = B, c = C x + offset, constant noise.
template <typename ScalarT, int N, int L, int P, int M>
struct LinearModel : ModelTypes<ScalarT, N, L, P, M> {
  using Base = ModelTypes<ScalarT, N, L, P, M>;
  using typename Base::ControlMatrix;
  using typename Base::NoiseChannel;
  using typename Base::ObsJacobian;
  using typename Base::ObsMatrix;
  using typename Base::Observation;
  using typename Base::State;
  using typename Base::StateMatrix;

  StateMatrix a = StateMatrix::Zero();
  ControlMatrix b = ControlMatrix::Zero();
  ObsJacobian c = ObsJacobian::Zero();
  Observation offset = Observation::Zero();
  NoiseChannel h = NoiseChannel::Zero();
  ObsMatrix sigmaO = ObsMatrix::Identity();

  State drift(const State& x) const { return a * x; }
  ControlMatrix controlMatrix(const State&) const { return b; }
  Observation observation(const State& x) const { return c * x + offset; }
  StateMatrix driftJacobian(const State&) const { return a; }
  ObsJacobian observationJacobian(const State&) const { return c; }
  ObsMatrix observationNoise(const State&) const { return sigmaO; }
  NoiseChannel processNoiseChannel() const { return h; }
};

using ScalarLinearModel = LinearModel<double, 1, 1, 1, 1>;

}  // namespace beliefpi
