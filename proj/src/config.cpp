#include "beliefpi/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace beliefpi {

namespace {

constexpr std::array<std::string_view, 4> kNames{"mppi-belief", "ce-mppi", "pipf", "ekf-ilqg"};

template <int N>
nlohmann::json vec(const Eigen::Matrix<double, N, 1>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

template <int N>
Eigen::Matrix<double, N, 1> readVec(const nlohmann::json& j, std::string_view key) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError("config: '" + std::string(key) + "' must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out(i) = j.at(i).get<double>();
  return out;
}

bool sortedNonEmpty(const std::vector<double>& v) { return !v.empty() && std::is_sorted(v.begin(), v.end()); }

}  // namespace

std::string_view controllerName(ControllerKind kind) { return kNames[static_cast<int>(kind)]; }

ControllerKind parseController(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<ControllerKind>(i);
  }
  throw ConfigError("unknown controller '" + std::string(name) + "'");
}

int BenchmarkConfig::steps() const { return static_cast<int>(std::lround(trialDuration / dt)); }

void BenchmarkConfig::validate() const {
  domain.validate();
  auto positive = [](double v, const char* what) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string("config: ") + what + " must be positive");
  };
  positive(dt, "dt");
  positive(lambda, "lambda");
  positive(trialDuration, "trial_duration");
  positive(obstacleWidth, "obstacle_width");
  if (horizon < 1 || samples < 1 || particles < 1 || samplesPerParticle < 1 || ilqgMaxIterations < 1) {
    throw ConfigError("config: horizon, samples, particles, samples_per_particle and ilqg_max_iterations must be >= 1");
  }
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (plotTrajectories < 0) throw ConfigError("config: plot_trajectories must be >= 0");
  if (!(obstacleWeight >= 0)) throw ConfigError("config: obstacle_weight must be non-negative");
  for (double t : theta) {
    if (!(t >= 0)) throw ConfigError("config: theta must be non-negative");
  }
  if ((initialCovarianceDiag.array() < 0).any()) throw ConfigError("config: initial covariance must be PSD");
  if ((stateWeightDiag.array() < 0).any() || (terminalWeightDiag.array() < 0).any()) {
    throw ConfigError("config: state weights must be non-negative");
  }
  if ((controlWeightDiag.array() <= 0).any()) throw ConfigError("config: control weights must be positive");
  if (!sortedNonEmpty(obstacleWeightGrid) || !sortedNonEmpty(thetaGrid)) {
    throw ConfigError("config: sweep grids must be non-empty and sorted");
  }
  if (!(matchingLambdaRange.first > 0) || matchingLambdaRange.second < matchingLambdaRange.first) {
    throw ConfigError("config: matching lambda range must be positive and ordered");
  }
  if (steps() < 1) throw ConfigError("config: trial_duration shorter than one step");
}

LightDarkCost BenchmarkConfig::makeCost(ControllerKind kind) const {
  LightDarkCost cost;
  cost.stateWeight = stateWeightDiag.asDiagonal();
  cost.reference = goal;
  cost.controlWeight = controlWeightDiag.asDiagonal();
  cost.terminalWeight = terminalWeightDiag.asDiagonal();
  cost.terminalReference = goal;
  cost.obstacles = domain.obstacles;
  cost.obstacleWeight = obstacleWeight;
  cost.obstacleWidth = obstacleWidth;
  cost.theta = theta[static_cast<int>(kind)];
  cost.lambda = lambda;
  return cost;
}

nlohmann::json toJson(const BenchmarkConfig& c) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : c.domain.obstacles) obstacles.push_back({{"center", vec<2>(o.center)}, {"radius", o.radius}});
  nlohmann::json theta;
  for (auto kind : kAllControllers) theta[std::string(controllerName(kind))] = c.theta[static_cast<int>(kind)];
  return {
      {"domain",
       {{"light_x", c.domain.lightX},
        {"noise_floor", c.domain.noiseFloor},
        {"noise_slope", c.domain.noiseSlope},
        {"process_std", c.domain.processStd},
        {"obstacles", obstacles}}},
      {"dt", c.dt},
      {"horizon", c.horizon},
      {"samples", c.samples},
      {"lambda", c.lambda},
      {"particles", c.particles},
      {"samples_per_particle", c.samplesPerParticle},
      {"ilqg_max_iterations", c.ilqgMaxIterations},
      {"theta", theta},
      {"start", vec<4>(c.start)},
      {"goal", vec<4>(c.goal)},
      {"trial_duration", c.trialDuration},
      {"initial_covariance_diag", vec<4>(c.initialCovarianceDiag)},
      {"state_weight_diag", vec<4>(c.stateWeightDiag)},
      {"terminal_weight_diag", vec<4>(c.terminalWeightDiag)},
      {"control_weight_diag", vec<2>(c.controlWeightDiag)},
      {"obstacle_weight", c.obstacleWeight},
      {"obstacle_width", c.obstacleWidth},
      {"trials", c.trials},
      {"seed", c.seed},
      {"obstacle_weight_grid", c.obstacleWeightGrid},
      {"theta_grid", c.thetaGrid},
      {"plot_trajectories", c.plotTrajectories},
      {"matching_lambda_range", {c.matchingLambdaRange.first, c.matchingLambdaRange.second}},
  };
}

BenchmarkConfig configFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  BenchmarkConfig c;
  try {
    static const std::set<std::string> known{
        "domain", "dt", "horizon", "samples", "lambda", "particles", "samples_per_particle", "ilqg_max_iterations",
        "theta", "start", "goal", "trial_duration", "initial_covariance_diag", "state_weight_diag",
        "terminal_weight_diag", "control_weight_diag", "obstacle_weight", "obstacle_width", "trials", "seed",
        "obstacle_weight_grid", "theta_grid", "plot_trajectories", "matching_lambda_range"};
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
    if (j.contains("domain")) {
      const auto& d = j.at("domain");
      for (const auto& [key, _] : d.items()) {
        if (key != "light_x" && key != "noise_floor" && key != "noise_slope" && key != "process_std" && key != "obstacles") {
          throw ConfigError("config: unknown domain key '" + key + "'");
        }
      }
      c.domain.lightX = d.value("light_x", c.domain.lightX);
      c.domain.noiseFloor = d.value("noise_floor", c.domain.noiseFloor);
      c.domain.noiseSlope = d.value("noise_slope", c.domain.noiseSlope);
      c.domain.processStd = d.value("process_std", c.domain.processStd);
      if (d.contains("obstacles")) {
        c.domain.obstacles.clear();
        for (const auto& o : d.at("obstacles")) {
          c.domain.obstacles.push_back({readVec<2>(o.at("center"), "obstacles.center"), o.at("radius").get<double>()});
        }
      }
    }
    c.dt = j.value("dt", c.dt);
    c.horizon = j.value("horizon", c.horizon);
    c.samples = j.value("samples", c.samples);
    c.lambda = j.value("lambda", c.lambda);
    c.particles = j.value("particles", c.particles);
    c.samplesPerParticle = j.value("samples_per_particle", c.samplesPerParticle);
    c.ilqgMaxIterations = j.value("ilqg_max_iterations", c.ilqgMaxIterations);
    if (j.contains("theta")) {
      for (const auto& [key, value] : j.at("theta").items()) {
        c.theta[static_cast<int>(parseController(key))] = value.get<double>();
      }
    }
    if (j.contains("start")) c.start = readVec<4>(j.at("start"), "start");
    if (j.contains("goal")) c.goal = readVec<4>(j.at("goal"), "goal");
    c.trialDuration = j.value("trial_duration", c.trialDuration);
    if (j.contains("initial_covariance_diag")) {
      c.initialCovarianceDiag = readVec<4>(j.at("initial_covariance_diag"), "initial_covariance_diag");
    }
    if (j.contains("state_weight_diag")) c.stateWeightDiag = readVec<4>(j.at("state_weight_diag"), "state_weight_diag");
    if (j.contains("terminal_weight_diag")) {
      c.terminalWeightDiag = readVec<4>(j.at("terminal_weight_diag"), "terminal_weight_diag");
    }
    if (j.contains("control_weight_diag")) {
      c.controlWeightDiag = readVec<2>(j.at("control_weight_diag"), "control_weight_diag");
    }
    c.obstacleWeight = j.value("obstacle_weight", c.obstacleWeight);
    c.obstacleWidth = j.value("obstacle_width", c.obstacleWidth);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    if (j.contains("obstacle_weight_grid")) c.obstacleWeightGrid = j.at("obstacle_weight_grid").get<std::vector<double>>();
    if (j.contains("theta_grid")) c.thetaGrid = j.at("theta_grid").get<std::vector<double>>();
    c.plotTrajectories = j.value("plot_trajectories", c.plotTrajectories);
    if (j.contains("matching_lambda_range")) {
      const auto r = j.at("matching_lambda_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("config: matching_lambda_range must have two entries");
      c.matchingLambdaRange = {r[0], r[1]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

BenchmarkConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return configFromJson(j);
}

}  // namespace beliefpi
