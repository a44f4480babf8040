#include "beliefpi/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "beliefpi/random.hpp"
#include "beliefpi/schedule.hpp"

namespace beliefpi {

namespace fs = std::filesystem;

namespace {

struct ReferenceRow {
  ControllerKind kind;
  double cost;
  double costStd;
  double collisionRate;
  double planMs;
};

constexpr std::array<ReferenceRow, 4> kReferenceTable{{
    {ControllerKind::EkfIlqg, 46.1, 6.2, 24.5, 148.0},
    {ControllerKind::CeMppi, 50.5, 6.2, 23.0, 13.0},
    {ControllerKind::Pipf, 47.6, 5.5, 18.0, 296.0},
    {ControllerKind::MppiBelief, 56.5, 5.2, 0.0, 18.0},
}};
constexpr double kReferenceMatchingResidual = 0.79;

std::ofstream openOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

nlohmann::json statsToJson(const ControllerStats& s) {
  return {{"controller", controllerName(s.controller)},
          {"trials", s.trials},
          {"mean_cost", s.meanCost},
          {"std_cost", s.stdCost},
          {"mean_base_cost", s.meanBaseCost},
          {"std_base_cost", s.stdBaseCost},
          {"collision_rate", s.collisionRate},
          {"mean_clearance", s.meanClearance},
          {"flagged_trials", s.flaggedTrials},
          {"flags", s.flags}};
}

void meanStd(std::span<const double> v, double& mean, double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

const ControllerStats& BenchmarkReport::stats(ControllerKind kind) const {
  for (const auto& s : controllers) {
    if (s.controller == kind) return s;
  }
  throw std::out_of_range("report has no entry for " + std::string(controllerName(kind)));
}

std::uint64_t trialSeed(std::uint64_t master, int trial, ControllerKind kind) {
  return deriveSeed(master, {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(kind)});
}

ControllerStats aggregate(ControllerKind kind, std::span<const TrialResult> trials) {
  ControllerStats s;
  s.controller = kind;
  s.trials = static_cast<int>(trials.size());
  if (trials.empty()) return s;
  std::vector<double> costs, baseCosts;
  int collisions = 0;
  for (const auto& t : trials) {
    costs.push_back(t.cost);
    baseCosts.push_back(t.baseCost);
    collisions += t.collision ? 1 : 0;
    s.meanClearance += t.minClearance;
    s.meanPlanMs += t.meanPlanMs;
    if (t.flaggedSteps > 0) {
      ++s.flaggedTrials;
      s.flags.push_back("trial " + std::to_string(t.trial) + ": " + t.firstFlag);
    }
  }
  const double n = static_cast<double>(trials.size());
  meanStd(costs, s.meanCost, s.stdCost);
  meanStd(baseCosts, s.meanBaseCost, s.stdBaseCost);
  s.collisionRate = 100.0 * collisions / n;
  s.meanClearance /= n;
  s.meanPlanMs /= n;
  return s;
}

MatchingReport startMatchingReport(const BenchmarkConfig& config) {
  const auto domain = config.makeDomain();
  const auto schedule = propagateSchedule(domain, config.start, std::span<const LightDarkDomain::Control>{},
                                          config.initialCovariance(), config.dt, config.horizon);
  const LightDarkDomain::ControlWeight r = config.controlWeightDiag.asDiagonal();
  return matchingReport(schedule, r, config.matchingLambdaRange);
}

BenchmarkReport runBenchmark(const BenchmarkConfig& config, std::span<const ControllerKind> kinds, int threads) {
  config.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");

  BenchmarkReport report;
  const auto matching = startMatchingReport(config);
  report.matchingResidual = matching.worstResidual;
  for (const auto& step : matching.steps) {
    if (step.residual == matching.worstResidual) {
      report.matchingLambda = step.lambda;
      break;
    }
  }

  const std::size_t perController = static_cast<std::size_t>(config.trials);
  const std::size_t jobs = kinds.size() * perController;
  report.trials.resize(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const ControllerKind kind = kinds[job / perController];
      const int trial = static_cast<int>(job % perController);
      try {
        report.trials[job] = runTrial(config, kind, trialSeed(config.seed, trial, kind), trial);
      } catch (...) {
        std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(jobs, 1)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t c = 0; c < kinds.size(); ++c) {
    report.controllers.push_back(
        aggregate(kinds[c], std::span<const TrialResult>(report.trials).subspan(c * perController, perController)));
  }
  return report;
}

std::vector<SweepPoint> sweepObstacleWeight(const BenchmarkConfig& config, std::span<const double> grid,
                                            std::span<const ControllerKind> kinds, int threads) {
  std::vector<SweepPoint> points;
  for (double w : grid) {
    BenchmarkConfig c = config;
    c.obstacleWeight = w;
    points.push_back({w, runBenchmark(c, kinds, threads)});
  }
  return points;
}

std::vector<SweepPoint> sweepTheta(const BenchmarkConfig& config, std::span<const double> grid, int threads) {
  constexpr std::array kinds{ControllerKind::MppiBelief};
  std::vector<SweepPoint> points;
  for (double theta : grid) {
    BenchmarkConfig c = config;
    c.theta[static_cast<int>(ControllerKind::MppiBelief)] = theta;
    points.push_back({theta, runBenchmark(c, kinds, threads)});
  }
  return points;
}

nlohmann::json reportToJson(const BenchmarkReport& report, const BenchmarkConfig& config) {
  nlohmann::json controllers = nlohmann::json::array();
  for (const auto& s : report.controllers) controllers.push_back(statsToJson(s));
  nlohmann::json reference = nlohmann::json::object();
  for (const auto& row : kReferenceTable) {
    reference[std::string(controllerName(row.kind))] = {
        {"mean_cost", row.cost}, {"std_cost", row.costStd}, {"collision_rate", row.collisionRate}, {"plan_ms", row.planMs}};
  }
  return {{"config", toJson(config)},
          {"controllers", controllers},
          {"matching", {{"residual", report.matchingResidual}, {"lambda", report.matchingLambda}}},
          {"reference", {{"controllers", reference}, {"matching_residual", kReferenceMatchingResidual}}},
          {"metadata",
           {{"cost",
             "realized true-state cost: running quadratic state and control cost plus obstacle penalty, "
             "integrated with dt, plus the terminal quadratic; whether the reference cost column is realized "
             "or planned belief cost is not known"},
            {"collision", "true position inside any obstacle disc at any recorded step"},
            {"timing", "planning wall-clock is hardware dependent and kept in timing.json"}}}};
}

nlohmann::json timingToJson(const BenchmarkReport& report) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : report.controllers) out[std::string(controllerName(s.controller))] = {{"mean_plan_ms", s.meanPlanMs}};
  return out;
}

nlohmann::json trialToJson(const TrialResult& t) {
  return {{"controller", controllerName(t.controller)},
          {"trial", t.trial},
          {"seed", t.seed},
          {"cost", t.cost},
          {"base_cost", t.baseCost},
          {"collision", t.collision},
          {"min_clearance", t.minClearance},
          {"mean_plan_ms", t.meanPlanMs},
          {"flagged_steps", t.flaggedSteps},
          {"first_flag", t.firstFlag}};
}

TrialResult trialFromJson(const nlohmann::json& j) {
  TrialResult t;
  t.controller = parseController(j.at("controller").get<std::string>());
  t.trial = j.at("trial").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.cost = j.at("cost").get<double>();
  t.baseCost = j.at("base_cost").get<double>();
  t.collision = j.at("collision").get<bool>();
  t.minClearance = j.at("min_clearance").get<double>();
  t.meanPlanMs = j.at("mean_plan_ms").get<double>();
  t.flaggedSteps = j.at("flagged_steps").get<int>();
  t.firstFlag = j.at("first_flag").get<std::string>();
  return t;
}

nlohmann::json sweepToJson(const std::vector<SweepPoint>& points, const std::string& parameter) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json controllers = nlohmann::json::array();
    for (const auto& s : p.report.controllers) controllers.push_back(statsToJson(s));
    rows.push_back({{parameter, p.value}, {"controllers", controllers}});
  }
  return {{"parameter", parameter}, {"points", rows}};
}

void writeBenchmark(const fs::path& dir, const BenchmarkReport& report, const BenchmarkConfig& config) {
  fs::create_directories(dir);
  openOut(dir / "report.json") << reportToJson(report, config).dump(2) << '\n';
  openOut(dir / "timing.json") << timingToJson(report).dump(2) << '\n';
  auto lines = openOut(dir / "trials.jsonl");
  for (const auto& t : report.trials) lines << trialToJson(t).dump() << '\n';
}

std::vector<ControllerStats> aggregateJsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<ControllerKind> order;
  std::map<ControllerKind, std::vector<TrialResult>> byKind;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t = trialFromJson(nlohmann::json::parse(line));
    if (!byKind.count(t.controller)) order.push_back(t.controller);
    byKind[t.controller].push_back(std::move(t));
  }
  std::vector<ControllerStats> out;
  for (auto kind : order) out.push_back(aggregate(kind, byKind[kind]));
  return out;
}

void emitPlotData(const BenchmarkReport& report, const BenchmarkConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  auto traj = openOut(dir / "trajectories.csv");
  traj << "controller,trial,k,t,px,py,vx,vy,mu_px,mu_py,var_px,var_py,ux,uy\n";
  traj.precision(10);
  for (const auto& t : report.trials) {
    if (t.trial >= config.plotTrajectories) continue;
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      const auto& x = t.states[k];
      traj << controllerName(t.controller) << ',' << t.trial << ',' << k << ',' << static_cast<double>(k) * config.dt;
      for (int i = 0; i < 4; ++i) traj << ',' << x(i);
      if (k < t.controls.size()) {
        traj << ',' << t.beliefMeans[k](0) << ',' << t.beliefMeans[k](1) << ',' << t.beliefVariances[k](0) << ','
             << t.beliefVariances[k](1) << ',' << t.controls[k](0) << ',' << t.controls[k](1);
      } else {
        traj << ",,,,,,";
      }
      traj << '\n';
    }
  }

  auto field = openOut(dir / "noise_field.csv");
  field << "px,sigma_o\n";
  if (report.controllers.empty()) return;
  const auto domain = config.makeDomain();
  for (int i = 0; i <= 160; ++i) {
    const double px = -4.0 + 0.1 * i;
    field << px << ',' << domain.noiseScale(px) << '\n';
  }
}

void emitSweepData(const std::vector<SweepPoint>& points, const std::string& parameter,
                   std::span<const ControllerKind> kinds, const fs::path& dir) {
  fs::create_directories(dir);
  for (auto kind : kinds) {
    auto out = openOut(dir / ("sweep_" + parameter + "_" + std::string(controllerName(kind)) + ".csv"));
    out << parameter << ",trials,collision_rate,mean_clearance,mean_cost,std_cost,mean_base_cost,std_base_cost\n";
    out.precision(12);
    for (const auto& p : points) {
      for (const auto& s : p.report.controllers) {
        if (s.controller != kind) continue;
        out << p.value << ',' << s.trials << ',' << s.collisionRate << ',' << s.meanClearance << ',' << s.meanCost
            << ',' << s.stdCost << ',' << s.meanBaseCost << ',' << s.stdBaseCost << '\n';
      }
    }
  }
}

}  // namespace beliefpi
