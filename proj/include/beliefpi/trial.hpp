#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/config.hpp"

namespace beliefpi {

/// Outcome of one closed-loop run. Costs are realized on the true state.
struct TrialResult {
  ControllerKind controller = ControllerKind::MppiBelief;
  int trial = 0;
  std::uint64_t seed = 0;

  std::vector<Eigen::Vector4d> states;           // x_0..x_T
  std::vector<Eigen::Vector4d> beliefMeans;      // filtered mean at each planning step
  std::vector<Eigen::Vector4d> beliefVariances;  // diag Sigma at each planning step
  std::vector<Eigen::Vector2d> controls;

  double cost = 0.0;      // base + obstacle penalty
  double baseCost = 0.0;  // quadratic state + control + terminal
  bool collision = false;
  double minClearance = 0.0;
  double meanPlanMs = 0.0;  // wall clock of the planning call
  int flaggedSteps = 0;     // planner fallbacks and filter resets
  std::string firstFlag;
};

/// Samples x_0 ~ N(mu_0, Sigma_0), then per step: observe, filter update,
/// plan, apply u_0, Euler-Maruyama step.
TrialResult runTrial(const BenchmarkConfig& config, ControllerKind kind, std::uint64_t seed, int trialIndex = 0);

/// CSV `t,px,py,vx,vy,mu_px,mu_py,mu_vx,mu_vy,var_px,var_py,var_vx,var_vy,ux,uy`, one row per planning step
/// plus a final row holding only the terminal state.
void writeTrajectoryCsv(std::ostream& os, const TrialResult& trial, double dt);

}  // namespace beliefpi
