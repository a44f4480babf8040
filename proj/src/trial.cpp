#include "beliefpi/trial.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>

#include "beliefpi/controllers.hpp"
#include "beliefpi/ilqg.hpp"
#include "beliefpi/random.hpp"
#include "beliefpi/schedule.hpp"
#include "beliefpi/simulator.hpp"

namespace beliefpi {

namespace {

using Belief = GaussianBelief<LightDarkDomain>;
using Control = LightDarkDomain::Control;
using State = LightDarkDomain::State;

// Stream ids below a trial seed.
enum Stream : std::uint64_t { kInitStream = 0, kProcessStream = 1, kObservationStream = 2, kParticleStream = 3, kPlanStream = 4 };

}  // namespace

TrialResult runTrial(const BenchmarkConfig& config, ControllerKind kind, std::uint64_t seed, int trialIndex) {
  config.validate();
  const LightDarkDomain domain = config.makeDomain();
  const LightDarkCost cost = config.makeCost(kind);
  cost.validate();
  const double dt = config.dt;
  const int steps = config.steps();

  Rng initRng(deriveSeed(seed, {kInitStream}));
  Rng processRng(deriveSeed(seed, {kProcessStream}));
  Rng observationRng(deriveSeed(seed, {kObservationStream}));
  Rng particleRng(deriveSeed(seed, {kParticleStream}));

  TrialResult result;
  result.controller = kind;
  result.trial = trialIndex;
  result.seed = seed;
  result.states.reserve(steps + 1);
  result.controls.reserve(steps);

  Belief belief{config.start, config.initialCovariance()};
  State x = sampleGaussian(belief, initRng);

  ParticleFilter<LightDarkDomain> particles;
  if (kind == ControllerKind::Pipf) particles = ParticleFilter<LightDarkDomain>::fromGaussian(belief, config.particles, particleRng);
  std::optional<EkfIlqg<LightDarkDomain>> ilqg;
  if (kind == ControllerKind::EkfIlqg) {
    ilqg.emplace(domain, IlqgOptions{config.horizon, dt, config.ilqgMaxIterations});
  }
  const auto ceTable = ReducedCostTable<double, 4>::certaintyEquivalent(cost, config.horizon);

  auto flag = [&](const std::string& what) {
    ++result.flaggedSteps;
    if (result.firstFlag.empty()) result.firstFlag = what;
  };

  double obstacleCost = 0.0;
  double planMs = 0.0;
  double minClearance = std::numeric_limits<double>::infinity();
  const auto& stateWeight = cost.stateWeight;

  for (int k = 0; k < steps; ++k) {
    result.states.push_back(x);
    minClearance = std::min(minClearance, clearance(x.head<2>(), domain.obstacles()));

    const auto y = observe(domain, x, dt, observationRng);
    belief = ekfCorrect(belief, y, domain, dt);
    if (kind == ControllerKind::Pipf) {
      if (!particles.update(domain, y, dt)) {
        flag("particle degeneracy at step " + std::to_string(k) + ", reinitialized from the EKF belief");
        particles = ParticleFilter<LightDarkDomain>::fromGaussian(belief, config.particles, particleRng);
      }
      particles.resampleIfNeeded(particleRng);
    }
    result.beliefMeans.push_back(belief.mean);
    result.beliefVariances.push_back(belief.covariance.diagonal());

    const SamplingOptions sampling{config.samples, deriveSeed(seed, {kPlanStream, static_cast<std::uint64_t>(k)})};
    Control u = Control::Zero();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (kind) {
        case ControllerKind::MppiBelief: {
          const auto schedule = propagateSchedule(domain, belief.mean, std::span<const Control>{}, belief.covariance,
                                                  dt, config.horizon);
          u = mppiBelief(domain, belief.mean, schedule, cost, sampling).control;
          break;
        }
        case ControllerKind::CeMppi:
          u = ceMppi(domain, belief.mean, cost, ceTable, dt, sampling).control;
          break;
        case ControllerKind::Pipf:
          u = pipf(domain, std::span<const State>(particles.particles()), std::span<const double>(particles.weights()),
                   cost, config.horizon, dt, config.samplesPerParticle, sampling)
                  .control;
          break;
        case ControllerKind::EkfIlqg: {
          const auto out = ilqg->plan(belief.mean, cost);
          if (out.degenerate) flag("ilqg regularization exhausted at step " + std::to_string(k));
          u = out.control;
          break;
        }
      }
    } catch (const NumericalError& e) {
      flag(std::string("planner failure: ") + e.what());
      u.setZero();
    }
    planMs += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!u.allFinite()) {
      flag("non-finite control at step " + std::to_string(k));
      u.setZero();
    }
    result.controls.push_back(u);

    const State d = x - cost.referenceAt(k);
    result.baseCost += (0.5 * d.dot(stateWeight * d) + 0.5 * u.dot(cost.controlWeight * u)) * dt;
    obstacleCost += obstaclePenalty(x.head<2>(), cost.obstacles, cost.obstacleWeight, cost.obstacleWidth) * dt;

    x = eulerMaruyamaStep(domain, x, u, dt, processRng);
    belief = ekfPredict(belief, u, domain, dt);
    if (kind == ControllerKind::Pipf) particles.predict(domain, u, dt, particleRng);
  }

  result.states.push_back(x);
  minClearance = std::min(minClearance, clearance(x.head<2>(), domain.obstacles()));
  const State dT = x - cost.terminalReference;
  result.baseCost += 0.5 * dT.dot(cost.terminalWeight * dT);
  result.cost = result.baseCost + obstacleCost;
  result.minClearance = minClearance;
  result.collision = minClearance < 0.0;
  result.meanPlanMs = planMs / steps;
  return result;
}

void writeTrajectoryCsv(std::ostream& os, const TrialResult& trial, double dt) {
  os << "t,px,py,vx,vy,mu_px,mu_py,mu_vx,mu_vy,var_px,var_py,var_vx,var_vy,ux,uy\n";
  const auto precision = os.precision(10);
  for (std::size_t k = 0; k < trial.controls.size(); ++k) {
    os << static_cast<double>(k) * dt;
    for (int i = 0; i < 4; ++i) os << ',' << trial.states[k](i);
    for (int i = 0; i < 4; ++i) os << ',' << trial.beliefMeans[k](i);
    for (int i = 0; i < 4; ++i) os << ',' << trial.beliefVariances[k](i);
    os << ',' << trial.controls[k](0) << ',' << trial.controls[k](1) << '\n';
  }
  if (!trial.states.empty() && trial.states.size() > trial.controls.size()) {
    os << static_cast<double>(trial.controls.size()) * dt;
    for (int i = 0; i < 4; ++i) os << ',' << trial.states.back()(i);
    os << ",,,,,,,,,,\n";
  }
  os.precision(precision);
}

}  // namespace beliefpi
