#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beliefpi/config.hpp"
#include "beliefpi/matching.hpp"
#include "beliefpi/trial.hpp"

namespace beliefpi {

struct ControllerStats {
  ControllerKind controller = ControllerKind::MppiBelief;
  int trials = 0;
  double meanCost = 0.0;
  double stdCost = 0.0;
  double meanBaseCost = 0.0;
  double stdBaseCost = 0.0;
  double collisionRate = 0.0;  // percent
  double meanClearance = 0.0;
  double meanPlanMs = 0.0;
  int flaggedTrials = 0;
  std::vector<std::string> flags;  // "trial <i>: <first flag>"
};

struct BenchmarkReport {
  std::vector<ControllerStats> controllers;
  double matchingResidual = 0.0;  // worst per-knot residual of the start-belief schedule
  double matchingLambda = 0.0;    // best-fit temperature at the worst knot
  std::vector<TrialResult> trials;

  const ControllerStats& stats(ControllerKind kind) const;
};

struct SweepPoint {
  double value = 0.0;
  BenchmarkReport report;
};

/// Trial seed from master seed, trial index and controller id.
std::uint64_t trialSeed(std::uint64_t master, int trial, ControllerKind kind);

/// Statistics over trials in index order. An empty span gives a zero row.
ControllerStats aggregate(ControllerKind kind, std::span<const TrialResult> trials);

/// Matching diagnostics of the schedule propagated from the start belief.
MatchingReport startMatchingReport(const BenchmarkConfig& config);

/// Runs `config.trials` trials per controller on `threads` workers.
/// Results do not depend on `threads`.
BenchmarkReport runBenchmark(const BenchmarkConfig& config, std::span<const ControllerKind> kinds, int threads = 1);

std::vector<SweepPoint> sweepObstacleWeight(const BenchmarkConfig& config, std::span<const double> grid,
                                            std::span<const ControllerKind> kinds, int threads = 1);
/// MPPI-Belief only.
std::vector<SweepPoint> sweepTheta(const BenchmarkConfig& config, std::span<const double> grid, int threads = 1);

/// Deterministic content only; timings are kept out.
nlohmann::json reportToJson(const BenchmarkReport& report, const BenchmarkConfig& config);
nlohmann::json timingToJson(const BenchmarkReport& report);
nlohmann::json trialToJson(const TrialResult& trial);
/// Scalar metrics only; trajectories are not persisted in JSON-lines.
TrialResult trialFromJson(const nlohmann::json& j);
nlohmann::json sweepToJson(const std::vector<SweepPoint>& points, const std::string& parameter);

/// Writes report.json, timing.json and trials.jsonl into `dir`.
void writeBenchmark(const std::filesystem::path& dir, const BenchmarkReport& report, const BenchmarkConfig& config);
/// Reads trials.jsonl and re-aggregates per controller.
std::vector<ControllerStats> aggregateJsonl(const std::filesystem::path& path);

/// trajectories.csv (first `config.plotTrajectories` trials per controller) and noise_field.csv.
void emitPlotData(const BenchmarkReport& report, const BenchmarkConfig& config, const std::filesystem::path& dir);
/// One `sweep_<parameter>_<controller>.csv` per controller present in the points.
void emitSweepData(const std::vector<SweepPoint>& points, const std::string& parameter,
                   std::span<const ControllerKind> kinds, const std::filesystem::path& dir);

}  // namespace beliefpi
