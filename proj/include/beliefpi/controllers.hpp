#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"
#include "beliefpi/costs.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/models.hpp"
#include "beliefpi/random.hpp"
#include "beliefpi/schedule.hpp"

namespace beliefpi {

struct SamplingOptions {
  int samples = 500;
  std::uint64_t seed = 0;
};

template <typename ControlT>
struct ControllerOutput {
  ControlT control;
  double effectiveSampleSize = 0.0;  // 1 / sum w~^2, in [1, N]
  double minCost = 0.0;
  double maxCost = 0.0;
  double weightEntropy = 0.0;
  bool degenerate = false;  // no usable noise channel at step 0, or a solver fallback
  int iterations = 0;       // iLQG only
};

/// A sampled belief-mean trajectory; only recorded on request.
template <SystemModel Model>
struct Rollout {
  std::vector<Eigen::VectorXd> noise;  // eps_k, dimension r_k
  std::vector<typename Model::State> means;
  double cost = 0.0;
  double weight = 0.0;  // normalized
};

/// M0 = R^-1 G0^T (G0 R^-1 G0^T)^+ L0, mapping first-step noise to control.
template <typename DG, typename DR, typename DL>
Eigen::MatrixXd controlFromNoiseMap(const Eigen::MatrixBase<DG>& g0, const Eigen::MatrixBase<DR>& r,
                                    const Eigen::MatrixBase<DL>& l0) {
  const Eigen::MatrixXd g = g0.template cast<double>();
  Eigen::LLT<Eigen::MatrixXd> llt(r.template cast<double>());
  if (llt.info() != Eigen::Success) throw ConfigError("control weight R must be SPD");
  const Eigen::MatrixXd rInvGt = llt.solve(g.transpose());  // l x n
  const Eigen::MatrixXd authority = g * rInvGt;             // n x n
  return rInvGt * pseudoInverse(authority) * l0.template cast<double>();
}

struct WeightedControl {
  Eigen::VectorXd control;
  double effectiveSampleSize = 0.0;
  double minCost = 0.0;
  double maxCost = 0.0;
  double weightEntropy = 0.0;
};

/// Normalized weights w~ = exp(-(S - min S)/lambda) / sum and
/// u = M0 sum_i w~_i eps0_i / dt. `firstNoise` holds eps0 per column.
inline WeightedControl weightedControl(std::span<const double> costs, const Eigen::MatrixXd& firstNoise,
                                       const Eigen::MatrixXd& m0, double lambda, double dt,
                                       std::vector<double>* weightsOut = nullptr) {
  if (costs.empty()) throw ConfigError("weightedControl: no samples");
  if (!(lambda > 0)) throw ConfigError("weightedControl: lambda must be positive");
  WeightedControl out;
  out.minCost = *std::min_element(costs.begin(), costs.end());
  out.maxCost = *std::max_element(costs.begin(), costs.end());
  std::vector<double> w(costs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    w[i] = std::exp(-(costs[i] - out.minCost) / lambda);
    total += w[i];
  }
  double sumSq = 0.0;
  Eigen::VectorXd meanNoise = Eigen::VectorXd::Zero(firstNoise.rows());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] /= total;
    sumSq += w[i] * w[i];
    if (w[i] > 0) out.weightEntropy -= w[i] * std::log(w[i]);
    if (firstNoise.rows() > 0) meanNoise += w[i] * firstNoise.col(static_cast<Eigen::Index>(i));
  }
  out.effectiveSampleSize = 1.0 / sumSq;
  out.control = firstNoise.rows() > 0 ? Eigen::VectorXd(m0 * meanNoise / dt) : Eigen::VectorXd::Zero(m0.rows());
  if (weightsOut) *weightsOut = std::move(w);
  return out;
}

/// Samples uncontrolled rollouts mu_{k+1} = mu_k + f(mu_k) dt + L_k eps_k,
/// eps_k ~ N(0, dt I), scores them with the cost table and returns the
/// importance-weighted first-step control. Rollout i draws from its own
/// stream deriveSeed(seed, {i}).
template <SystemModel Model>
ControllerOutput<typename Model::Control> pathIntegralControl(
    const Model& model, const typename Model::State& mu0,
    std::span<const FactorMatrix<typename Model::Scalar, Model::kStateDim>> factors,
    const typename Model::ControlMatrix& g0, const typename Model::ControlWeight& r,
    const ReducedCostTable<typename Model::Scalar, Model::kStateDim>& table, double lambda, double dt,
    const SamplingOptions& opts, std::vector<Rollout<Model>>* record = nullptr) {
  using Scalar = typename Model::Scalar;
  using State = typename Model::State;
  constexpr int N = Model::kStateDim;

  const int horizon = table.horizon();
  if (opts.samples < 1) throw ConfigError("sampling: need at least one sample");
  if (static_cast<int>(factors.size()) < horizon) throw ConfigError("sampling: fewer diffusion factors than steps");

  const int r0 = static_cast<int>(factors[0].cols());
  Eigen::MatrixXd firstNoise(r0, opts.samples);
  std::vector<double> costs(opts.samples);
  const double sqrtDt = std::sqrt(dt);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, N, 1> eps;
  if (record) record->assign(opts.samples, Rollout<Model>{});

  for (int i = 0; i < opts.samples; ++i) {
    Rng rng(deriveSeed(opts.seed, {static_cast<std::uint64_t>(i)}));
    State mu = mu0;
    double cost = 0.0;
    for (int k = 0; k < horizon; ++k) {
      const auto& lk = factors[k];
      eps.resize(lk.cols());
      rng.fillNormal(eps, sqrtDt);
      if (k == 0 && r0 > 0) firstNoise.col(i) = eps.template cast<double>();
      if (record) {
        (*record)[i].means.push_back(mu);
        (*record)[i].noise.push_back(eps.template cast<double>());
      }
      cost += table.running(k, mu) * dt;
      State next = mu + model.drift(mu) * dt;
      if (lk.cols() > 0) next.noalias() += lk * eps;
      mu = next;
    }
    cost += table.terminal(mu);
    costs[i] = cost;
    if (record) {
      (*record)[i].means.push_back(mu);
      (*record)[i].cost = cost;
    }
  }

  ControllerOutput<typename Model::Control> out;
  std::vector<double> weights;
  const Eigen::MatrixXd m0 =
      r0 > 0 ? controlFromNoiseMap(g0, r, factors[0]) : Eigen::MatrixXd::Zero(Model::kControlDim, 0);
  const auto wc = weightedControl(costs, firstNoise, m0, lambda, dt, record ? &weights : nullptr);
  out.control = wc.control.template cast<Scalar>();
  out.effectiveSampleSize = wc.effectiveSampleSize;
  out.minCost = wc.minCost;
  out.maxCost = wc.maxCost;
  out.weightEntropy = wc.weightEntropy;
  out.degenerate = r0 == 0;
  if (record) {
    for (int i = 0; i < opts.samples; ++i) (*record)[i].weight = weights[i];
  }
  return out;
}

/// MPPI in Gaussian belief space: rollouts are driven by the scheduled
/// innovation diffusion L_k and scored with the reduced (risk-sensitive)
/// costs under the scheduled covariances.
template <SystemModel Model>
ControllerOutput<typename Model::Control> mppiBelief(const Model& model, const typename Model::State& mu0,
                                                     const BeliefSchedule<Model>& schedule,
                                                     const CostSpecFor<Model>& spec, const SamplingOptions& opts,
                                                     std::vector<Rollout<Model>>* record = nullptr) {
  using Scalar = typename Model::Scalar;
  constexpr int N = Model::kStateDim;
  const int horizon = schedule.horizon();
  std::vector<typename Model::StateMatrix> covariances;
  std::vector<FactorMatrix<Scalar, N>> factors;
  covariances.reserve(horizon + 1);
  factors.reserve(horizon);
  for (int k = 0; k <= horizon; ++k) {
    covariances.push_back(schedule.steps[k].covariance);
    if (k < horizon) factors.push_back(schedule.steps[k].factor);
  }
  const auto table = ReducedCostTable<Scalar, N>::belief(
      spec, std::span<const typename Model::StateMatrix>(covariances));
  return pathIntegralControl(model, mu0, std::span<const FactorMatrix<Scalar, N>>(factors),
                             schedule.steps[0].controlMatrix, spec.controlWeight, table, spec.lambda, schedule.dt, opts,
                             record);
}

/// Diffusion factor of the process noise, H itself when it fits.
template <SystemModel Model>
FactorMatrix<typename Model::Scalar, Model::kStateDim> processNoiseFactor(const Model& model) {
  if constexpr (Model::kNoiseDim <= Model::kStateDim) {
    return model.processNoiseChannel();
  } else {
    return psdFactor(processCovariance(model)).factor;
  }
}

/// Certainty-equivalent MPPI on the belief mean: process-noise-driven rollouts
/// scored with q(mu) at zero covariance and theta = 0.
template <SystemModel Model>
ControllerOutput<typename Model::Control> ceMppi(
    const Model& model, const typename Model::State& mu0, const CostSpecFor<Model>& spec,
    const ReducedCostTable<typename Model::Scalar, Model::kStateDim>& ceTable, double dt,
    const SamplingOptions& opts, std::vector<Rollout<Model>>* record = nullptr) {
  using Factor = FactorMatrix<typename Model::Scalar, Model::kStateDim>;
  const std::vector<Factor> factors(ceTable.horizon(), processNoiseFactor(model));
  return pathIntegralControl(model, mu0, std::span<const Factor>(factors), model.controlMatrix(mu0),
                             spec.controlWeight, ceTable, spec.lambda, dt, opts, record);
}

template <SystemModel Model>
ControllerOutput<typename Model::Control> ceMppi(const Model& model, const typename Model::State& mu0,
                                                 const CostSpecFor<Model>& spec, int horizon, double dt,
                                                 const SamplingOptions& opts) {
  const auto table =
      ReducedCostTable<typename Model::Scalar, Model::kStateDim>::certaintyEquivalent(spec, horizon);
  return ceMppi(model, mu0, spec, table, dt, opts);
}

/// PIPF-style control: CE-MPPI from every particle with `samplesPerParticle`
/// rollouts (particle j seeded by deriveSeed(seed, {j})), combined with the
/// normalized particle weights.
template <SystemModel Model>
ControllerOutput<typename Model::Control> pipf(const Model& model,
                                               std::span<const typename Model::State> particles,
                                               std::span<const double> particleWeights,
                                               const CostSpecFor<Model>& spec, int horizon, double dt,
                                               int samplesPerParticle, const SamplingOptions& opts) {
  if (particles.empty() || particles.size() != particleWeights.size()) {
    throw ConfigError("pipf: need one weight per particle and at least one particle");
  }
  const double total = std::accumulate(particleWeights.begin(), particleWeights.end(), 0.0);
  if (!(total > 0)) throw NumericalError("pipf: particle weights sum to zero");

  const auto table =
      ReducedCostTable<typename Model::Scalar, Model::kStateDim>::certaintyEquivalent(spec, horizon);
  ControllerOutput<typename Model::Control> out;
  out.control.setZero();
  out.minCost = std::numeric_limits<double>::infinity();
  out.maxCost = -std::numeric_limits<double>::infinity();
  out.degenerate = true;
  for (std::size_t j = 0; j < particles.size(); ++j) {
    const double w = particleWeights[j] / total;
    SamplingOptions sub{samplesPerParticle, deriveSeed(opts.seed, {static_cast<std::uint64_t>(j)})};
    const auto pj = ceMppi(model, particles[j], spec, table, dt, sub);
    out.control += w * pj.control;
    out.effectiveSampleSize += w * pj.effectiveSampleSize;
    out.weightEntropy += w * pj.weightEntropy;
    out.minCost = std::min(out.minCost, pj.minCost);
    out.maxCost = std::max(out.maxCost, pj.maxCost);
    out.degenerate = out.degenerate && pj.degenerate;
  }
  return out;
}

}  // namespace beliefpi
