#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/common.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/models.hpp"
#include "beliefpi/random.hpp"

namespace beliefpi {

/// x+ = x + (f(x) + G(x) u) dt + H xi,  xi ~ N(0, I dt).
template <SystemModel Model>
typename Model::State eulerMaruyamaStep(const Model& model, const typename Model::State& x,
                                        const typename Model::Control& u, double dt, Rng& rng) {
  if (!(dt > 0)) throw ConfigError("eulerMaruyamaStep: dt must be positive");
  Eigen::Matrix<typename Model::Scalar, Model::kNoiseDim, 1> xi;
  rng.fillNormal(xi, std::sqrt(dt));
  return x + (model.drift(x) + model.controlMatrix(x) * u) * dt + model.processNoiseChannel() * xi;
}

/// Discrete observation y = c(x) + sigma_o(x) eta / sqrt(dt): the increment
/// model averaged over one step, with covariance R_o / dt.
template <SystemModel Model>
typename Model::Observation observe(const Model& model, const typename Model::State& x, double dt, Rng& rng) {
  if (!(dt > 0)) throw ConfigError("observe: dt must be positive");
  typename Model::Observation eta;
  rng.fillNormal(eta);
  return model.observation(x) + model.observationNoise(x) * eta / std::sqrt(dt);
}

template <SystemModel Model>
struct GaussianBelief {
  typename Model::State mean;
  typename Model::StateMatrix covariance;
};

/// One Euler step of the mean with covariance F Sigma F^T + Q dt, F = I + A dt.
/// This is the exact covariance map of the Euler-Maruyama step for linear
/// models and stays PSD however sharp the prior is.
template <SystemModel Model>
GaussianBelief<Model> ekfPredict(const GaussianBelief<Model>& belief, const typename Model::Control& u,
                                 const Model& model, double dt) {
  using StateMatrix = typename Model::StateMatrix;
  const StateMatrix f = StateMatrix::Identity() + model.driftJacobian(belief.mean) * dt;
  GaussianBelief<Model> out;
  out.mean = belief.mean + (model.drift(belief.mean) + model.controlMatrix(belief.mean) * u) * dt;
  out.covariance = symmetrize(StateMatrix(f * belief.covariance * f.transpose() + processCovariance(model) * dt));
  return out;
}

/// Measurement update with R_d = R_o / dt and a Joseph-form covariance.
template <SystemModel Model>
GaussianBelief<Model> ekfCorrect(const GaussianBelief<Model>& belief, const typename Model::Observation& y,
                                 const Model& model, double dt) {
  using ObsMatrix = typename Model::ObsMatrix;
  using StateMatrix = typename Model::StateMatrix;
  const auto c = model.observationJacobian(belief.mean);
  const ObsMatrix rd = observationCovariance(model, belief.mean) / dt;
  const ObsMatrix innovationCov = symmetrize(ObsMatrix(c * belief.covariance * c.transpose() + rd));
  Eigen::LLT<ObsMatrix> llt(innovationCov);
  if (llt.info() != Eigen::Success || !innovationCov.allFinite()) {
    throw NumericalError("ekfCorrect: innovation covariance is singular");
  }
  const typename Model::GainMatrix gain = llt.solve(c * belief.covariance).transpose();
  GaussianBelief<Model> out;
  out.mean = belief.mean + gain * (y - model.observation(belief.mean));
  const StateMatrix ikc = StateMatrix::Identity() - gain * c;
  out.covariance =
      symmetrize(StateMatrix(ikc * belief.covariance * ikc.transpose() + gain * rd * gain.transpose()));
  return out;
}

template <SystemModel Model>
GaussianBelief<Model> ekfStep(const GaussianBelief<Model>& belief, const typename Model::Control& u,
                              const typename Model::Observation& y, const Model& model, double dt) {
  return ekfCorrect(ekfPredict(belief, u, model, dt), y, model, dt);
}

/// Draws x ~ N(mean, cov) through a PSD factor (cov may be singular).
template <SystemModel Model>
typename Model::State sampleGaussian(const GaussianBelief<Model>& belief, Rng& rng) {
  const auto f = psdFactor(belief.covariance);
  Eigen::Matrix<typename Model::Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, Model::kStateDim, 1> z(f.rank);
  rng.fillNormal(z);
  typename Model::State x = belief.mean;
  if (f.rank > 0) x += f.factor * z;
  return x;
}

/// Bootstrap particle filter: process-noise prediction, likelihood
/// reweighting and systematic resampling when ESS < K/2.
template <SystemModel Model>
class ParticleFilter {
 public:
  using State = typename Model::State;

  ParticleFilter() = default;

  static ParticleFilter fromGaussian(const GaussianBelief<Model>& belief, int count, Rng& rng) {
    if (count < 1) throw ConfigError("particle filter: need at least one particle");
    ParticleFilter pf;
    pf.particles_.reserve(count);
    for (int i = 0; i < count; ++i) pf.particles_.push_back(sampleGaussian(belief, rng));
    pf.weights_.assign(count, 1.0 / count);
    return pf;
  }

  const std::vector<State>& particles() const { return particles_; }
  const std::vector<double>& weights() const { return weights_; }

  void predict(const Model& model, const typename Model::Control& u, double dt, Rng& rng) {
    for (auto& p : particles_) p = eulerMaruyamaStep(model, p, u, dt, rng);
  }

  /// Reweights by N(y; c(x), R_o(x)/dt). Returns false (weights untouched)
  /// when every particle lies beyond ~1e-12 relative likelihood.
  bool update(const Model& model, const typename Model::Observation& y, double dt) {
    using ObsMatrix = typename Model::ObsMatrix;
    std::vector<double> logLik(particles_.size());
    double bestMahalanobis = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < particles_.size(); ++i) {
      const ObsMatrix rd = observationCovariance(model, particles_[i]) / dt;
      Eigen::LLT<ObsMatrix> llt(rd);
      const auto e = (y - model.observation(particles_[i])).eval();
      const double m2 = e.dot(llt.solve(e));
      const double logDet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      logLik[i] = -0.5 * m2 - 0.5 * logDet;
      bestMahalanobis = std::min(bestMahalanobis, m2);
    }
    if (!(bestMahalanobis < kDegenerateMahalanobis)) return false;

    double maxLog = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < particles_.size(); ++i) {
      logLik[i] += std::log(std::max(weights_[i], 1e-300));
      maxLog = std::max(maxLog, logLik[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < particles_.size(); ++i) {
      weights_[i] = std::exp(logLik[i] - maxLog);
      total += weights_[i];
    }
    for (auto& w : weights_) w /= total;
    return true;
  }

  double effectiveSampleSize() const {
    double s = 0.0;
    for (double w : weights_) s += w * w;
    return 1.0 / s;
  }

  /// Systematic resampling; a no-op unless ESS < K/2.
  bool resampleIfNeeded(Rng& rng) {
    const std::size_t k = particles_.size();
    if (effectiveSampleSize() >= 0.5 * static_cast<double>(k)) return false;
    std::uniform_real_distribution<double> uniform(0.0, 1.0 / static_cast<double>(k));
    double u = uniform(rng);
    std::vector<State> next;
    next.reserve(k);
    double cumulative = weights_[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < k; ++i) {
      while (u > cumulative && j + 1 < k) cumulative += weights_[++j];
      next.push_back(particles_[j]);
      u += 1.0 / static_cast<double>(k);
    }
    particles_.swap(next);
    weights_.assign(k, 1.0 / static_cast<double>(k));
    return true;
  }

  State mean() const {
    State m = State::Zero();
    for (std::size_t i = 0; i < particles_.size(); ++i) m += weights_[i] * particles_[i];
    return m;
  }

 private:
  // 2 ln(1e12): relative likelihood floor for declaring degeneracy.
  static constexpr double kDegenerateMahalanobis = 55.262042231857095;

  std::vector<State> particles_;
  std::vector<double> weights_;
};

}  // namespace beliefpi
