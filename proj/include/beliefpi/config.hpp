#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "beliefpi/costs.hpp"
#include "beliefpi/light_dark.hpp"

namespace beliefpi {

enum class ControllerKind { MppiBelief = 0, CeMppi = 1, Pipf = 2, EkfIlqg = 3 };

inline constexpr std::array<ControllerKind, 4> kAllControllers{ControllerKind::MppiBelief, ControllerKind::CeMppi,
                                                               ControllerKind::Pipf, ControllerKind::EkfIlqg};

std::string_view controllerName(ControllerKind kind);
ControllerKind parseController(std::string_view name);  // throws ConfigError

using LightDarkCost = CostSpecFor<LightDarkDomain>;

/// Everything a benchmark run needs. Defaults reproduce the light-dark
/// experiment; start, goal, duration, initial covariance and cost shapes are
/// choices of this implementation.
struct BenchmarkConfig {
  LightDarkParams domain;

  double dt = 0.1;
  int horizon = 30;
  int samples = 500;
  double lambda = 1.0;
  int particles = 50;
  int samplesPerParticle = 200;
  int ilqgMaxIterations = 50;
  std::array<double, 4> theta{1.0, 0.0, 0.0, 0.0};  // indexed by ControllerKind

  Eigen::Vector4d start{-2.0, 0.0, 0.0, 0.0};
  Eigen::Vector4d goal{8.0, 0.0, 0.0, 0.0};
  double trialDuration = 12.0;
  Eigen::Vector4d initialCovarianceDiag{0.5, 0.5, 0.5, 0.5};

  Eigen::Vector4d stateWeightDiag{0.5, 0.5, 0.0, 0.0};
  Eigen::Vector4d terminalWeightDiag{1.0, 1.0, 0.0, 0.0};
  Eigen::Vector2d controlWeightDiag{1.0, 1.0};
  double obstacleWeight = 500.0;
  double obstacleWidth = 1.0;

  int trials = 200;
  std::uint64_t seed = 42;
  std::vector<double> obstacleWeightGrid{100.0, 500.0, 2500.0, 10000.0};
  std::vector<double> thetaGrid{0.0, 0.5, 1.0, 2.0, 5.0};
  int plotTrajectories = 50;
  std::pair<double, double> matchingLambdaRange{1e-3, 1e3};

  void validate() const;  // throws ConfigError

  int steps() const;
  Eigen::Matrix4d initialCovariance() const { return initialCovarianceDiag.asDiagonal(); }
  LightDarkDomain makeDomain() const { return LightDarkDomain(domain); }
  LightDarkCost makeCost(ControllerKind kind) const;
};

nlohmann::json toJson(const BenchmarkConfig& config);
/// Overlays `j` onto the defaults; unknown keys are rejected.
BenchmarkConfig configFromJson(const nlohmann::json& j);
BenchmarkConfig loadConfig(const std::string& path);

}  // namespace beliefpi
