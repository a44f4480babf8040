#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beliefpi/harness.hpp"
#include "beliefpi/schedule.hpp"

namespace fs = std::filesystem;
using namespace beliefpi;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string controller = "all";
  std::string out = "out";
  int threads = 1;
};

void addCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config overlaid on the defaults");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--trials", f.trials, "trials per controller");
  cmd->add_option("--controller", f.controller, "mppi-belief|ce-mppi|pipf|ekf-ilqg|all");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

BenchmarkConfig resolveConfig(const CommonFlags& f) {
  BenchmarkConfig c = f.config.empty() ? BenchmarkConfig{} : loadConfig(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  c.validate();
  return c;
}

std::vector<ControllerKind> resolveControllers(const std::string& name) {
  if (name == "all") return {kAllControllers.begin(), kAllControllers.end()};
  return {parseController(name)};
}

void printStats(const std::vector<ControllerStats>& rows) {
  std::cout << std::left << std::setw(13) << "controller" << std::right << std::setw(18) << "cost" << std::setw(12)
            << "collision%" << std::setw(12) << "clearance" << std::setw(11) << "plan ms" << std::setw(9) << "flagged"
            << '\n';
  for (const auto& s : rows) {
    std::ostringstream cost;
    cost << std::fixed << std::setprecision(2) << s.meanCost << " +- " << s.stdCost;
    std::cout << std::left << std::setw(13) << controllerName(s.controller) << std::right << std::setw(18) << cost.str()
              << std::fixed << std::setprecision(1) << std::setw(12) << s.collisionRate << std::setprecision(3)
              << std::setw(12) << s.meanClearance << std::setprecision(2) << std::setw(11) << s.meanPlanMs
              << std::setw(9) << s.flaggedTrials << '\n';
  }
  std::cout.unsetf(std::ios::floatfield);
}

int cmdRun(const CommonFlags& f, int trial, const std::string& trajectory) {
  const auto config = resolveConfig(f);
  for (auto kind : resolveControllers(f.controller)) {
    const auto r = runTrial(config, kind, trialSeed(config.seed, trial, kind), trial);
    std::cout << controllerName(kind) << " trial " << trial << " seed " << r.seed << '\n'
              << "  cost " << r.cost << " (base " << r.baseCost << ")\n"
              << "  collision " << (r.collision ? "yes" : "no") << ", min clearance " << r.minClearance << " m\n"
              << "  final state " << r.states.back().transpose() << '\n'
              << "  mean plan " << r.meanPlanMs << " ms, flagged steps " << r.flaggedSteps << '\n';
    if (!r.firstFlag.empty()) std::cout << "  first flag: " << r.firstFlag << '\n';
    if (!trajectory.empty()) {
      fs::path path = trajectory;
      if (f.controller == "all") {
        path = fs::path(trajectory).replace_extension("").string() + "_" + std::string(controllerName(kind)) + ".csv";
      }
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
      writeTrajectoryCsv(out, r, config.dt);
    }
  }
  return 0;
}

int cmdBench(const CommonFlags& f, bool plotData) {
  const auto config = resolveConfig(f);
  const auto kinds = resolveControllers(f.controller);
  const auto report = runBenchmark(config, kinds, f.threads);
  writeBenchmark(f.out, report, config);
  if (plotData) emitPlotData(report, config, f.out);
  printStats(report.controllers);
  std::cout << "matching residual " << report.matchingResidual << " (lambda " << report.matchingLambda << ")\n"
            << "wrote " << (fs::path(f.out) / "report.json").string() << '\n';
  return 0;
}

int cmdSweep(const CommonFlags& f, const std::string& parameter) {
  const auto config = resolveConfig(f);
  std::vector<SweepPoint> points;
  std::vector<ControllerKind> kinds;
  if (parameter == "w_obs") {
    kinds = resolveControllers(f.controller);
    points = sweepObstacleWeight(config, config.obstacleWeightGrid, kinds, f.threads);
  } else {
    kinds = {ControllerKind::MppiBelief};
    points = sweepTheta(config, config.thetaGrid, f.threads);
  }
  fs::create_directories(f.out);
  std::ofstream(fs::path(f.out) / ("sweep_" + parameter + ".json")) << sweepToJson(points, parameter).dump(2) << '\n';
  emitSweepData(points, parameter, kinds, f.out);
  for (const auto& p : points) {
    std::cout << parameter << " = " << p.value << '\n';
    printStats(p.report.controllers);
  }
  return 0;
}

int cmdMatching(const CommonFlags& f, const std::string& scheduleCsv) {
  const auto config = resolveConfig(f);
  const auto report = startMatchingReport(config);
  writeMatchingCsv(std::cout, report);
  std::cout << "epsilon* " << report.worstResidual << '\n';
  if (!scheduleCsv.empty()) {
    const auto schedule = propagateSchedule(config.makeDomain(), config.start,
                                            std::span<const LightDarkDomain::Control>{}, config.initialCovariance(),
                                            config.dt, config.horizon);
    std::ofstream out(scheduleCsv);
    if (!out) throw std::runtime_error("cannot write '" + scheduleCsv + "'");
    writeScheduleCsv(out, schedule);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path integral control in Gaussian belief space: light-dark benchmark"};
  app.require_subcommand(1);

  CommonFlags flags;
  int trialIndex = 0;
  std::string trajectory, scheduleCsv;
  bool dump = false;

  auto* run = app.add_subcommand("run", "single trial with a verbose summary");
  addCommon(run, flags);
  run->add_option("--trial", trialIndex, "trial index for seed derivation");
  run->add_option("--trajectory", trajectory, "write the trajectory CSV here");

  auto* bench = app.add_subcommand("bench", "all controllers over the configured trials");
  addCommon(bench, flags);
  auto* sweepW = app.add_subcommand("sweep-wobs", "sweep the planning obstacle weight");
  addCommon(sweepW, flags);
  auto* sweepT = app.add_subcommand("sweep-theta", "sweep the risk parameter of MPPI-Belief");
  addCommon(sweepT, flags);
  auto* matching = app.add_subcommand("matching-check", "matching diagnostics along the start-belief schedule");
  addCommon(matching, flags);
  matching->add_option("--schedule-csv", scheduleCsv, "also dump the covariance schedule");
  auto* config = app.add_subcommand("config", "show the effective configuration");
  addCommon(config, flags);
  config->add_flag("--dump", dump, "print the full JSON config");
  auto* plot = app.add_subcommand("plot-data", "benchmark plus trajectory and noise-field CSVs");
  addCommon(plot, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmdRun(flags, trialIndex, trajectory);
    if (*bench) return cmdBench(flags, false);
    if (*plot) return cmdBench(flags, true);
    if (*sweepW) return cmdSweep(flags, "w_obs");
    if (*sweepT) return cmdSweep(flags, "theta");
    if (*matching) return cmdMatching(flags, scheduleCsv);
    if (*config) {
      const auto c = resolveConfig(flags);
      if (dump) std::cout << toJson(c).dump(2) << '\n';
      else std::cout << "config ok (" << c.steps() << " steps, " << c.trials << " trials)\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
