// Acceptance suite. Usage:
//   acceptance <1..9> [--data DIR] [--cli PATH]
//   acceptance generate --data DIR
// Criteria 5-7 read the benchmark and sweep results that `generate` writes
// into DIR; every criterion prints one PASS/FAIL line and exits non-zero on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "beliefpi/controllers.hpp"
#include "beliefpi/costs.hpp"
#include "beliefpi/harness.hpp"
#include "beliefpi/ilqg.hpp"
#include "beliefpi/matching.hpp"
#include "beliefpi/schedule.hpp"
#include "beliefpi/simulator.hpp"
#include "support/oracles.hpp"

using namespace beliefpi;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Args {
  std::string criterion;
  fs::path data = "acceptance_data";
  std::string cli;
};

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Sub-check bookkeeping: details are printed indented, the verdict on one line.
class Verdict {
 public:
  explicit Verdict(int id, std::string title) : id_(id), title_(std::move(title)) {}

  bool check(bool ok, const std::string& what) {
    std::cout << "  " << (ok ? "ok   " : "FAIL ") << what << '\n';
    pass_ = pass_ && ok;
    return ok;
  }

  int finish() const {
    std::cout << (pass_ ? "PASS" : "FAIL") << " criterion " << id_ << ": " << title_ << std::endl;
    return pass_ ? 0 : 1;
  }

 private:
  int id_;
  std::string title_;
  bool pass_ = true;
};

Eigen::MatrixXd randomMatrix(std::mt19937_64& gen, int rows, int cols) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n01(gen);
  return m;
}

// Random matrix with singular values in [lo, hi], so rank decisions are unambiguous.
Eigen::MatrixXd conditionedMatrix(std::mt19937_64& gen, int rows, int cols, double lo = 0.3, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  const Eigen::MatrixXd qa = randomMatrix(gen, rows, rows).householderQr().householderQ();
  const Eigen::MatrixXd qb = randomMatrix(gen, cols, cols).householderQr().householderQ();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, cols);
  for (int i = 0; i < std::min(rows, cols); ++i) s(i, i) = u(gen);
  return qa * s * qb.transpose();
}

Eigen::MatrixXd randomSpd(std::mt19937_64& gen, int n, double lo = 0.2, double hi = 3.0) {
  const Eigen::MatrixXd b = conditionedMatrix(gen, n, n, std::sqrt(lo), std::sqrt(hi));
  return b * b.transpose();
}

using Lti4 = LinearModel<double, 4, 2, 2, 4>;

Lti4 randomStableLti(std::mt19937_64& gen) {
  Lti4 m;
  m.a = 0.5 * randomMatrix(gen, 4, 4) - 1.5 * Eigen::Matrix4d::Identity();
  m.b = randomMatrix(gen, 4, 2);
  m.c = randomMatrix(gen, 2, 4);
  m.h = 0.5 * randomMatrix(gen, 4, 4);
  m.sigmaO = Eigen::Matrix2d::Identity() * 0.7 + 0.1 * Eigen::Matrix2d::Ones();
  return m;
}

double relFro(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

// ---------------------------------------------------------------------------

int criterion1() {
  Verdict v(1, "path integral control matches the scalar LQR oracle");
  ScalarLinearModel m;
  m.b.setOnes();
  m.c.setOnes();
  m.h.setOnes();
  const double x0 = 1.0, dt = 0.1;
  const int horizon = 30;
  const auto schedule =
      propagateSchedule(m, ScalarLinearModel::State(x0), {}, ScalarLinearModel::StateMatrix(1.0), dt, horizon);
  const auto rInv = constructRInverse(schedule.steps[0].diffusion, schedule.steps[0].controlMatrix, 1.0);
  CostSpecFor<ScalarLinearModel> spec;
  spec.stateWeight(0, 0) = 1.0;
  spec.terminalWeight(0, 0) = 1.0;
  spec.controlWeight = rInv.inverse();
  spec.theta = 0.0;
  spec.lambda = 1.0;

  const double expected =
      oracle::scalarLqrFirstControl(x0, 1.0, 1.0, dt, horizon, spec.controlWeight(0, 0));
  const auto t0 = Clock::now();
  double sum = 0.0, worst = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const double u = mppiBelief(m, ScalarLinearModel::State(x0), schedule, spec,
                                SamplingOptions{100000, deriveSeed(2024, {std::uint64_t(s)})})
                         .control(0);
    sum += u;
    worst = std::max(worst, std::abs(u - expected) / std::abs(expected));
  }
  const double elapsed = secondsSince(t0);
  const double mean = sum / seeds;
  const double rel = std::abs(mean - expected) / std::abs(expected);
  v.check(std::abs(rInv(0, 0) - 1.0) < 1e-12, "matched weight R = " + fmt("%.6f", spec.controlWeight(0, 0)));
  v.check(rel <= 0.10, "mean u0 " + fmt("%.5f", mean) + " vs LQR " + fmt("%.5f", expected) + ", relative error " +
                           fmt("%.4f", rel) + " (worst single seed " + fmt("%.4f", worst) + ")");
  v.check(elapsed < 10.0, "runtime " + fmt("%.2f s", elapsed));
  return v.finish();
}

int criterion2() {
  Verdict v(2, "covariance schedule accuracy");
  std::mt19937_64 gen(2);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = randomStableLti(gen);
    const Eigen::Matrix4d sigma0 = randomSpd(gen, 4, 0.1, 4.0);
    const auto s = propagateSchedule(m, Eigen::Vector4d::Zero(), {}, sigma0, 0.1, 30);
    const auto ref =
        oracle::fineRiccati(sigma0, m.a, m.c, processCovariance(m), observationCovariance(m, Eigen::Vector4d::Zero()), 0.1, 30, 1000);
    for (int k = 0; k <= 30; ++k) worst = std::max(worst, relFro(s.steps[k].covariance, ref[k]));
  }
  v.check(worst <= 1e-4, "random stable 4-D LTI (20 models, 30 steps): worst relative error " + fmt("%.3e", worst));

  const LightDarkDomain d;
  for (double px : {-2.0, 5.0}) {
    const Eigen::Vector4d mu(px, 0.0, 0.0, 0.0);
    const Eigen::Matrix4d sigma0 = 0.5 * Eigen::Matrix4d::Identity();
    const auto s = propagateSchedule(d, mu, {}, sigma0, 0.1, 30);
    const auto ref = oracle::fineRiccati(sigma0, d.driftJacobian(mu), d.observationJacobian(mu), processCovariance(d),
                                         observationCovariance(d, mu), 0.1, 30, 1000);
    double err = 0.0;
    for (int k = 0; k <= 30; ++k) err = std::max(err, relFro(s.steps[k].covariance, ref[k]));
    v.check(err <= 1e-4, "light-dark at px = " + fmt("%.0f", px) + ": worst relative error " + fmt("%.3e", err));
  }

  ScalarLinearModel m;
  m.b.setOnes();
  m.c.setOnes();
  m.h.setOnes();
  const auto s = propagateSchedule(m, ScalarLinearModel::State(0.0), {}, ScalarLinearModel::StateMatrix(1.0), 0.1, 100);
  double drift = 0.0;
  for (const auto& st : s.steps) drift = std::max(drift, std::abs(st.covariance(0, 0) - 1.0));
  v.check(drift <= 1e-6, "scalar fixed point: max |Sigma - 1| = " + fmt("%.3e", drift));
  return v.finish();
}

int criterion3() {
  Verdict v(3, "matching feasibility constructions");
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> lam(0.1, 10.0);

  int inclusionOk = 0, inclusionRejected = 0, inclusionInfeasible = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = dim(gen);
    const int l = std::uniform_int_distribution<int>(1, n)(gen);
    const Eigen::MatrixXd g = conditionedMatrix(gen, n, l);
    // Any PSD middle factor, rank-deficient included.
    const Eigen::MatrixXd b = randomMatrix(gen, l, std::uniform_int_distribution<int>(0, l)(gen));
    const Eigen::MatrixXd d = g * b * b.transpose() * g.transpose();
    if (checkRangeInclusion(d, g)) ++inclusionOk;
    if (l < n) {
      ++inclusionInfeasible;
      Eigen::VectorXd z = randomMatrix(gen, n, 1);
      z -= g * (g.colPivHouseholderQr().solve(z));
      z.normalize();
      if (!checkRangeInclusion(Eigen::MatrixXd(d + z * z.transpose()), g)) ++inclusionRejected;
    }
  }
  v.check(inclusionOk == 1000, "inclusion: " + std::to_string(inclusionOk) + "/1000 constructed instances pass");
  v.check(inclusionRejected == inclusionInfeasible, "inclusion: " + std::to_string(inclusionRejected) + "/" +
                                                        std::to_string(inclusionInfeasible) +
                                                        " off-range instances rejected");

  int equalityOk = 0, spdOk = 0, infeasibleCount = 0, rejected = 0;
  double worstResidual = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = dim(gen);
    const int l = std::uniform_int_distribution<int>(1, n + 2)(gen);  // wide G has a kernel
    const int rank = std::min(n, l);
    const Eigen::MatrixXd g = conditionedMatrix(gen, n, l);
    const Eigen::MatrixXd r0 = randomSpd(gen, l);
    const double lambda = lam(gen);
    const Eigen::MatrixXd d = lambda * g * r0.inverse() * g.transpose();
    if (checkRangeEquality(d, g)) ++equalityOk;
    const Eigen::MatrixXd rInv = constructRInverse(d, g, lambda);
    worstResidual = std::max(worstResidual, (d - lambda * g * rInv * g.transpose()).norm() / d.norm());
    if ((rInv - rInv.transpose()).norm() <= 1e-12 * rInv.norm() && minEigenvalue(rInv) > 0) ++spdOk;

    // Rank-deficient middle factor: range(D) is a strict subspace of range(G).
    if (rank >= 1) {
      ++infeasibleCount;
      const Eigen::MatrixXd b = randomMatrix(gen, l, rank - 1);
      const Eigen::MatrixXd dBad = g * b * b.transpose() * g.transpose();
      bool threw = false;
      try {
        (void)constructRInverse(dBad, g, lambda);
      } catch (const InfeasibleMatching&) {
        threw = true;
      }
      if (!checkRangeEquality(dBad, g) && threw) ++rejected;
    }
  }
  v.check(equalityOk == 1000, "equality: " + std::to_string(equalityOk) + "/1000 constructed instances pass");
  v.check(worstResidual <= 1e-8, "constructRInverse worst relative residual " + fmt("%.3e", worstResidual));
  v.check(spdOk == 1000, "constructRInverse SPD on " + std::to_string(spdOk) + "/1000");
  v.check(rejected == infeasibleCount, "equality: " + std::to_string(rejected) + "/" + std::to_string(infeasibleCount) +
                                           " rank-deficient instances rejected");
  return v.finish();
}

int criterion4() {
  Verdict v(4, "closed-form cost moments");
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worstMean = 0.0, worstVar = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd sigma = randomSpd(gen, 4, 0.05, 2.0);
    const Eigen::MatrixXd qb = randomMatrix(gen, 4, std::uniform_int_distribution<int>(1, 4)(gen));
    const Eigen::MatrixXd q = qb * qb.transpose();
    const Eigen::VectorXd mu = 2.0 * randomMatrix(gen, 4, 1);
    const Eigen::VectorXd ref = randomMatrix(gen, 4, 1);
    const auto mc = oracle::quadraticMomentsByMonteCarlo(mu, sigma, q, ref, 1000000, 100 + i);
    worstMean = std::max(worstMean, std::abs(expectedQuadraticCost(mu, sigma, q, ref) - mc.mean) / mc.mean);
    worstVar = std::max(worstVar, std::abs(quadraticCostVariance(mu, sigma, q, ref) - mc.variance) / mc.variance);
  }
  v.check(worstMean <= 0.01, "quadratic mean vs 1e6-sample Monte Carlo (50 instances): worst " + fmt("%.4f", worstMean));
  v.check(worstVar <= 0.01, "quadratic variance vs 1e6-sample Monte Carlo (50 instances): worst " + fmt("%.4f", worstVar));

  double worstBumpMean = 0.0, worstBumpVar = 0.0;
  std::uniform_real_distribution<double> radius(0.3, 1.0), weight(0.5, 5.0), offset(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Matrix2d p = randomSpd(gen, 2, 0.02, 1.0);
    const Obstacle o{Eigen::Vector2d(3.0, 1.0), radius(gen)};
    const Eigen::Vector2d mu = o.center + Eigen::Vector2d(offset(gen), offset(gen));
    const double w = weight(gen);
    const auto got = obstacleCostMoments(mu, p, o, w, 1.0);
    const auto ref = oracle::bumpMomentsByQuadrature(mu, p, o.center, o.radius, w, 1e-10);
    worstBumpMean = std::max(worstBumpMean, std::abs(got.mean - ref.mean));
    worstBumpVar = std::max(worstBumpVar, std::abs(got.variance - ref.variance));
  }
  v.check(worstBumpMean <= 1e-6, "obstacle mean vs 2-D adaptive quadrature (50 instances): worst abs " +
                                     fmt("%.3e", worstBumpMean));
  v.check(worstBumpVar <= 1e-6, "obstacle variance vs 2-D adaptive quadrature (50 instances): worst abs " +
                                    fmt("%.3e", worstBumpVar));
  return v.finish();
}

// ---------------------------------------------------------------------------
// Benchmark-scale data, computed once by `generate`.

const std::vector<ControllerKind> kAllKinds{ControllerKind::MppiBelief, ControllerKind::CeMppi, ControllerKind::Pipf,
                                            ControllerKind::EkfIlqg};

int threadCount() { return std::max(1u, std::thread::hardware_concurrency()); }

void writeJson(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

nlohmann::json readJson(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string() + " (run `acceptance generate` first)");
  return nlohmann::json::parse(in);
}

int generate(const Args& args) {
  const BenchmarkConfig config;
  fs::create_directories(args.data);
  const int threads = threadCount();

  auto t0 = Clock::now();
  const auto bench = runBenchmark(config, kAllKinds, threads);
  const double benchSeconds = secondsSince(t0);
  writeBenchmark(args.data / "bench", bench, config);
  writeJson(args.data / "bench_runtime.json", {{"seconds", benchSeconds}, {"threads", threads}});
  std::cout << "bench: " << benchSeconds << " s\n" << std::flush;

  // Grid points equal to the defaults reuse the bench run: same config, same seeds, same results.
  std::vector<SweepPoint> wPoints;
  for (double w : config.obstacleWeightGrid) {
    if (w == config.obstacleWeight) {
      wPoints.push_back({w, bench});
      continue;
    }
    BenchmarkConfig c = config;
    c.obstacleWeight = w;
    t0 = Clock::now();
    wPoints.push_back({w, runBenchmark(c, kAllKinds, threads)});
    std::cout << "w_obs " << w << ": " << secondsSince(t0) << " s\n" << std::flush;
  }
  writeJson(args.data / "sweep_w_obs.json", sweepToJson(wPoints, "w_obs"));

  const auto kMppi = static_cast<std::size_t>(ControllerKind::MppiBelief);
  const std::vector<ControllerKind> mppiOnly{ControllerKind::MppiBelief};
  std::vector<SweepPoint> thetaPoints;
  for (double theta : config.thetaGrid) {
    BenchmarkConfig c = config;
    c.theta[kMppi] = theta;
    if (theta == config.theta[kMppi]) {
      BenchmarkReport r;
      r.controllers.push_back(bench.stats(ControllerKind::MppiBelief));
      thetaPoints.push_back({theta, r});
      continue;
    }
    t0 = Clock::now();
    thetaPoints.push_back({theta, runBenchmark(c, mppiOnly, threads)});
    std::cout << "theta " << theta << ": " << secondsSince(t0) << " s\n" << std::flush;
  }
  writeJson(args.data / "sweep_theta.json", sweepToJson(thetaPoints, "theta"));
  std::cout << "generated acceptance data in " << args.data << '\n';
  return 0;
}

const nlohmann::json& controllerEntry(const nlohmann::json& list, ControllerKind kind) {
  for (const auto& c : list) {
    if (c.at("controller").get<std::string>() == controllerName(kind)) return c;
  }
  throw std::runtime_error("controller missing from report: " + std::string(controllerName(kind)));
}

int criterion5(const Args& args) {
  Verdict v(5, "benchmark trends at the default configuration");
  const auto report = readJson(args.data / "bench" / "report.json");
  const auto timing = readJson(args.data / "bench" / "timing.json");
  const auto runtime = readJson(args.data / "bench_runtime.json");
  const auto& list = report.at("controllers");
  for (auto kind : kAllKinds) {
    const auto& c = controllerEntry(list, kind);
    std::cout << "  " << controllerName(kind) << ": trials " << c.at("trials").get<int>() << ", cost "
              << fmt("%.1f", c.at("mean_cost").get<double>()) << " +- " << fmt("%.1f", c.at("std_cost").get<double>())
              << ", collisions " << fmt("%.1f%%", c.at("collision_rate").get<double>()) << ", clearance "
              << fmt("%.2f m", c.at("mean_clearance").get<double>()) << ", plan "
              << fmt("%.2f ms", timing.at(std::string(controllerName(kind))).at("mean_plan_ms").get<double>())
              << '\n';
  }
  const auto& mppi = controllerEntry(list, ControllerKind::MppiBelief);
  v.check(mppi.at("trials").get<int>() == 200, "200 trials per controller");
  v.check(mppi.at("collision_rate").get<double>() <= 2.0,
          "MPPI-Belief collision rate " + fmt("%.1f%% <= 2%%", mppi.at("collision_rate").get<double>()));
  for (auto kind : {ControllerKind::CeMppi, ControllerKind::Pipf, ControllerKind::EkfIlqg}) {
    const double rate = controllerEntry(list, kind).at("collision_rate").get<double>();
    v.check(rate >= 10.0, std::string(controllerName(kind)) + " collision rate " + fmt("%.1f%% >= 10%%", rate));
  }
  const double mppiCost = mppi.at("mean_cost").get<double>();
  const double ceCost = controllerEntry(list, ControllerKind::CeMppi).at("mean_cost").get<double>();
  v.check(mppiCost > ceCost, "MPPI-Belief mean cost " + fmt("%.1f", mppiCost) + " > CE-MPPI " + fmt("%.1f", ceCost));
  const double pipfMs = timing.at("pipf").at("mean_plan_ms").get<double>();
  const double ceMs = timing.at("ce-mppi").at("mean_plan_ms").get<double>();
  v.check(pipfMs > 5.0 * ceMs, "PIPF planning " + fmt("%.2f ms", pipfMs) + " > 5 x CE-MPPI " + fmt("%.2f ms", ceMs));
  const double seconds = runtime.at("seconds").get<double>();
  v.check(seconds < 1800.0, "benchmark runtime " + fmt("%.0f s", seconds) + " on " +
                                std::to_string(runtime.at("threads").get<int>()) + " thread(s)");
  return v.finish();
}

int criterion6(const Args& args) {
  Verdict v(6, "obstacle weight sweep trend");
  const auto sweep = readJson(args.data / "sweep_w_obs.json");
  for (const auto& point : sweep.at("points")) {
    const double w = point.at("w_obs").get<double>();
    std::ostringstream line;
    line << "w_obs " << w << ':';
    for (auto kind : kAllKinds) {
      line << ' ' << controllerName(kind) << ' '
           << fmt("%.1f%%", controllerEntry(point.at("controllers"), kind).at("collision_rate").get<double>());
    }
    std::cout << "  " << line.str() << '\n';
  }
  for (const auto& point : sweep.at("points")) {
    const double w = point.at("w_obs").get<double>();
    const auto& controllers = point.at("controllers");
    if (w >= 2500.0) {
      const double rate = controllerEntry(controllers, ControllerKind::MppiBelief).at("collision_rate").get<double>();
      v.check(rate <= 2.0, "MPPI-Belief at w_obs " + fmt("%.0f", w) + ": " + fmt("%.1f%% <= 2%%", rate));
    }
    for (auto kind : {ControllerKind::CeMppi, ControllerKind::Pipf, ControllerKind::EkfIlqg}) {
      const double rate = controllerEntry(controllers, kind).at("collision_rate").get<double>();
      v.check(rate >= 8.0,
              std::string(controllerName(kind)) + " at w_obs " + fmt("%.0f", w) + ": " + fmt("%.1f%% >= 8%%", rate));
    }
  }
  return v.finish();
}

int criterion7(const Args& args) {
  Verdict v(7, "risk sensitivity sweep trend");
  const auto sweep = readJson(args.data / "sweep_theta.json");
  std::map<double, nlohmann::json> byTheta;
  for (const auto& point : sweep.at("points")) {
    const auto& c = controllerEntry(point.at("controllers"), ControllerKind::MppiBelief);
    const double theta = point.at("theta").get<double>();
    byTheta[theta] = c;
    std::cout << "  theta " << theta << ": collisions " << fmt("%.1f%%", c.at("collision_rate").get<double>())
              << ", clearance " << fmt("%.2f m", c.at("mean_clearance").get<double>()) << ", cost "
              << fmt("%.1f", c.at("mean_cost").get<double>()) << '\n';
  }
  if (!byTheta.count(0.0) || !byTheta.count(1.0)) {
    v.check(false, "sweep must contain theta = 0 and theta = 1");
    return v.finish();
  }
  const double gap = byTheta[0.0].at("collision_rate").get<double>() - byTheta[1.0].at("collision_rate").get<double>();
  v.check(gap >= 10.0, "collision rate drop from theta 0 to 1: " + fmt("%.1f points >= 10", gap));
  const double clearance = byTheta[1.0].at("mean_clearance").get<double>();
  v.check(clearance >= 0.5, "mean clearance at theta 1: " + fmt("%.2f m >= 0.5 m", clearance));
  return v.finish();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int criterion8(const Args& args) {
  Verdict v(8, "report.json is independent of the thread count");
  if (args.cli.empty()) {
    v.check(false, "--cli PATH is required");
    return v.finish();
  }
  const fs::path root = args.data / "determinism";
  fs::remove_all(root);
  std::string reports[2];
  const int threadCounts[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("threads" + std::to_string(threadCounts[i]));
    const std::string cmd = "\"" + args.cli + "\" bench --seed 42 --threads " + std::to_string(threadCounts[i]) +
                            " --out \"" + out.string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    v.check(rc == 0, "bench --seed 42 --threads " + std::to_string(threadCounts[i]) + " exit status " +
                         std::to_string(rc));
    reports[i] = slurp(out / "report.json");
  }
  v.check(!reports[0].empty() && reports[0] == reports[1],
          "report.json byte-identical (" + std::to_string(reports[0].size()) + " bytes)");
  return v.finish();
}

// ---------------------------------------------------------------------------

double welchT(const std::vector<double>& a, const std::vector<double>& b, double& df) {
  auto moments = [](const std::vector<double>& x, double& mean, double& var) {
    mean = 0.0;
    for (double e : x) mean += e;
    mean /= x.size();
    var = 0.0;
    for (double e : x) var += (e - mean) * (e - mean);
    var /= x.size() - 1;
  };
  double ma, va, mb, vb;
  moments(a, ma, va);
  moments(b, mb, vb);
  const double sa = va / a.size(), sb = vb / b.size();
  df = (sa + sb) * (sa + sb) / (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  return (ma - mb) / std::sqrt(sa + sb);
}

// Two-sided 99% Student-t quantile via the Cornish-Fisher expansion in 1/df.
double tCritical99(double df) {
  const double z = 2.5758293035489004;
  const double z3 = z * z * z, z5 = z3 * z * z;
  return z + (z3 + z) / (4 * df) + (5 * z5 + 16 * z3 + 3 * z) / (96 * df * df);
}

int criterion9() {
  Verdict v(9, "module property suites");
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  {  // models
    const LightDarkDomain d;
    double worstA = 0.0, worstC = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector4d x(6 * u(gen) + 3, 3 * u(gen), u(gen), u(gen));
      const Eigen::Matrix4d a = d.driftJacobian(x);
      const auto c = d.observationJacobian(x);
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d e = Eigen::Vector4d::Zero();
        e(j) = 1e-5;
        worstA = std::max(worstA, ((d.drift(x + e) - d.drift(x - e)) / 2e-5 - a.col(j)).cwiseAbs().maxCoeff());
        worstC = std::max(worstC,
                          ((d.observation(x + e) - d.observation(x - e)) / 2e-5 - c.col(j)).cwiseAbs().maxCoeff());
      }
    }
    v.check(worstA <= 1e-4 && worstC <= 1e-4, "models: Jacobians match central differences (" +
                                                  fmt("%.1e", std::max(worstA, worstC)) + ")");
    bool monotone = true;
    for (double px = 5.0; px < 15.0; px += 0.1) {
      monotone = monotone && d.noiseScale(px + 0.1) > d.noiseScale(px) && d.noiseScale(10.0 - px - 0.1) > d.noiseScale(10.0 - px);
    }
    v.check(monotone, "models: sigma_o increases with distance from the light on both sides");
  }

  {  // schedule
    const auto m = randomStableLti(gen);
    const Eigen::Matrix4d s0 = randomSpd(gen, 4);
    const auto a = propagateSchedule(m, Eigen::Vector4d::Zero(), {}, s0, 0.1, 20);
    const auto b = propagateSchedule(m, Eigen::Vector4d::Zero(), {}, s0, 0.1, 20);
    std::vector<Eigen::Vector2d> push(20);
    for (auto& p : push) p = Eigen::Vector2d(u(gen), u(gen));
    const auto c = propagateSchedule(m, Eigen::Vector4d::Zero(), std::span<const Eigen::Vector2d>(push), s0, 0.1, 20);
    bool identical = true, controlFree = true;
    for (int k = 0; k <= 20; ++k) {
      identical = identical && a.steps[k].covariance == b.steps[k].covariance && a.steps[k].factor == b.steps[k].factor;
      controlFree = controlFree && a.steps[k].covariance == c.steps[k].covariance;
    }
    v.check(identical, "schedule: bitwise deterministic");
    v.check(controlFree, "schedule: independent of nominal controls for a linear model");
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto lm = randomStableLti(gen);
      const Eigen::Matrix4d lo = randomSpd(gen, 4, 0.05, 2.0);
      const Eigen::MatrixXd extra = randomMatrix(gen, 4, 2);
      const Eigen::Matrix4d hi = lo + extra * extra.transpose();
      const auto sl = propagateSchedule(lm, Eigen::Vector4d::Zero(), {}, lo, 0.1, 30);
      const auto sh = propagateSchedule(lm, Eigen::Vector4d::Zero(), {}, hi, 0.1, 30);
      for (int k = 0; k <= 30; ++k) {
        worst = std::min(worst, minEigenvalue(Eigen::Matrix4d(sh.steps[k].covariance - sl.steps[k].covariance)));
      }
    }
    v.check(worst >= -1e-8, "schedule: Loewner order preserved on 50 random pairs (min eig " + fmt("%.2e", worst) + ")");
  }

  {  // matching
    int spd = 0, consistent = 0, scalar = 0;
    for (int i = 0; i < 200; ++i) {
      const int n = std::uniform_int_distribution<int>(1, 5)(gen);
      const int l = std::uniform_int_distribution<int>(1, 5)(gen);
      const Eigen::MatrixXd g = conditionedMatrix(gen, n, l);
      const Eigen::MatrixXd d = g * randomSpd(gen, l) * g.transpose();
      const Eigen::MatrixXd rInv = constructRInverse(d, g, 1.0);
      if ((rInv - rInv.transpose()).norm() <= 1e-12 * rInv.norm() && minEigenvalue(rInv) > 0) ++spd;
      // Consistency of the definitions on a mix of feasible and infeasible pairs.
      const Eigen::MatrixXd b = randomMatrix(gen, n, std::uniform_int_distribution<int>(0, n)(gen));
      const Eigen::MatrixXd dMix = b * b.transpose();
      const auto half = psdFactor(dMix);
      const bool lhs = checkRangeEquality(dMix, g);
      const bool rhs = checkRangeInclusion(dMix, g) && checkRangeInclusion(Eigen::MatrixXd(g * g.transpose()), half.factor);
      if (lhs == rhs) ++consistent;
      const double ds = std::abs(u(gen)) + 0.01, gs = u(gen) >= 0 ? 0.5 + u(gen) : -0.5 + u(gen);
      if (checkRangeEquality(Eigen::Matrix<double, 1, 1>(ds), Eigen::Matrix<double, 1, 1>(gs))) ++scalar;
    }
    v.check(spd == 200, "matching: constructed R^-1 symmetric positive definite (" + std::to_string(spd) + "/200)");
    v.check(consistent == 200, "matching: equality == inclusion both ways (" + std::to_string(consistent) + "/200)");
    v.check(scalar == 200, "matching: scalar systems always match (" + std::to_string(scalar) + "/200)");
  }

  {  // costs
    BenchmarkConfig config;
    bool under = true, monotone = true, nonNegative = true, bounded = true;
    for (int i = 0; i < 200; ++i) {
      const Eigen::Matrix4d sigma = randomSpd(gen, 4, 0.01, 3.0);
      const Eigen::Vector4d mu(4 * u(gen) + 3, 3 * u(gen), u(gen), u(gen));
      const Eigen::Matrix4d q = config.makeCost(ControllerKind::MppiBelief).stateWeight;
      const double plain = 0.5 * (mu - config.goal).dot(q * (mu - config.goal));
      under = under && plain < expectedQuadraticCost(mu, sigma, q, config.goal);
      double previous = -1.0;
      for (double theta : config.thetaGrid) {
        config.theta[0] = theta;
        const auto spec = config.makeCost(ControllerKind::MppiBelief);
        const double c = reducedRunningCost(mu, sigma, spec, 0);
        monotone = monotone && c >= previous;
        nonNegative = nonNegative && c >= 0.0 && reducedTerminalCost(mu, sigma, spec) >= 0.0;
        previous = c;
      }
      const auto& o = config.domain.obstacles[0];
      const double w = 10.0 * std::abs(u(gen)) + 0.1;
      const auto moments = obstacleCostMoments(mu.head<2>(), Eigen::Matrix2d(sigma.topLeftCorner<2, 2>()), o, w, 1.0);
      bounded = bounded && moments.mean < w && moments.variance >= 0.0;
    }
    const auto& o = config.domain.obstacles[0];
    const double atCenter = obstacleCostMoments(o.center, Eigen::Matrix2d::Zero(), o, 7.0, 1.0).mean;
    v.check(under, "costs: dropping the trace term underestimates the expected cost");
    v.check(monotone, "costs: reduced cost non-decreasing in theta");
    v.check(nonNegative, "costs: reduced running and terminal costs non-negative");
    v.check(bounded && atCenter == 7.0, "costs: obstacle mean below w_obs, equal to it only at P = 0, mu = o");
  }

  {  // controllers
    const int n = 100;
    std::vector<double> costs(n);
    for (int i = 0; i < n; ++i) costs[i] = 0.5 * ((i * 61) % n) + 0.25;
    Eigen::MatrixXd eps(2, n);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = u(gen);
    const Eigen::MatrixXd m0 = randomMatrix(gen, 2, 2);
    const auto base = weightedControl(costs, eps, m0, 0.7, 0.1);
    bool invariant = true;
    for (double shift : {-1000.0, 3.5, 1e7}) {
      std::vector<double> shifted = costs;
      for (double& c : shifted) c += shift;
      const auto out = weightedControl(shifted, eps, m0, 0.7, 0.1);
      invariant = invariant && out.control == base.control;
    }
    v.check(invariant, "controllers: constant cost shifts leave the control bitwise unchanged");

    std::vector<double> weights;
    weightedControl(costs, eps, m0, 1e-6, 0.1, &weights);
    const auto best = std::min_element(costs.begin(), costs.end()) - costs.begin();
    v.check(weights[best] >= 0.999, "controllers: lambda = 1e-6 puts " + fmt("%.6f", weights[best]) +
                                        " of the weight on the best sample");

    // Fully actuated 3-state system with a null direction in D.
    Eigen::Matrix<double, 3, 2> l0;
    l0 << 1.0, 0.2, -0.4, 1.0, 0.0, 0.0;
    const Eigen::Matrix3d g = conditionedMatrix(gen, 3, 3);
    const Eigen::Matrix3d r = randomSpd(gen, 3);
    const Eigen::MatrixXd map = controlFromNoiseMap(g, r, l0);
    const Eigen::Vector3d nullDir(0, 0, 1);
    double leak = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector3d uu = map * Eigen::Vector2d(u(gen), u(gen));
      leak = std::max(leak, std::abs(nullDir.dot(g * uu)));
    }
    v.check(leak < 1e-12, "controllers: score outside range(D0) annihilated (" + fmt("%.1e", leak) + ")");

    // Under-actuated: u0 lies in range(R^-1 G^T).
    Eigen::Matrix<double, 4, 2> gl = Eigen::Matrix<double, 4, 2>::Zero();
    gl.bottomRows<2>() = conditionedMatrix(gen, 2, 2);
    const Eigen::Matrix2d rl = randomSpd(gen, 2);
    const Eigen::MatrixXd ml = controlFromNoiseMap(gl, rl, randomMatrix(gen, 4, 3));
    const Eigen::MatrixXd span = rl.llt().solve(gl.transpose());
    const Eigen::MatrixXd projector = span * pseudoInverse(span);
    v.check((projector * ml - ml).norm() < 1e-10, "controllers: u0 lies in range(R^-1 G^T)");

    BenchmarkConfig config;
    const LightDarkDomain d = config.makeDomain();
    const auto spec = config.makeCost(ControllerKind::MppiBelief);
    const Eigen::Vector4d mu(0.5, 0.3, 0.2, 0.0);
    const auto s = propagateSchedule(d, mu, {}, Eigen::Matrix4d::Identity(), 0.1, 30);
    const auto c1 = mppiBelief(d, mu, s, spec, SamplingOptions{300, 11});
    const auto c2 = mppiBelief(d, mu, s, spec, SamplingOptions{300, 11});
    v.check(c1.control == c2.control && c1.effectiveSampleSize == c2.effectiveSampleSize,
            "controllers: identical seeds give identical outputs");
  }

  {  // simulator
    using Di = LinearModel<double, 2, 1, 1, 1>;
    Di m;
    m.a << 0, 1, 0, 0;
    m.b << 0, 1;
    m.c << 1, 0;
    m.h << 0, 0.4;
    m.sigmaO(0, 0) = 0.5;
    double nees = 0.0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
      Rng rng(deriveSeed(99, {std::uint64_t(t)}));
      GaussianBelief<Di> b{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()};
      Eigen::Vector2d x = sampleGaussian(b, rng);
      for (int k = 0; k < 50; ++k) {
        const Eigen::Matrix<double, 1, 1> uk(0.5 * std::cos(0.1 * k));
        x = eulerMaruyamaStep(m, x, uk, 0.1, rng);
        b = ekfStep(b, uk, observe(m, x, 0.1, rng), m, 0.1);
      }
      const Eigen::Vector2d e = b.mean - x;
      nees += e.dot(b.covariance.ldlt().solve(e));
    }
    nees /= trials;
    v.check(nees >= 1.6 && nees <= 2.4, "simulator: mean NEES " + fmt("%.3f", nees) + " in [0.8n, 1.2n] for n = 2");

    BenchmarkConfig config;
    config.trialDuration = 4.0;
    bool exact = true;
    for (auto kind : kAllKinds) {
      const auto t = runTrial(config, kind, deriveSeed(5, {std::uint64_t(kind)}));
      const auto spec = config.makeCost(kind);
      double obstacle = 0.0;
      for (int k = 0; k < config.steps(); ++k) {
        obstacle += obstaclePenalty(t.states[k].head<2>(), spec.obstacles, spec.obstacleWeight, spec.obstacleWidth) *
                    config.dt;
      }
      exact = exact && std::abs(t.cost - (t.baseCost + obstacle)) <= 1e-9 * std::max(1.0, t.cost);
    }
    v.check(exact, "simulator: total cost = base cost + obstacle penalty on every controller");

    // State-independent, small observation noise removes the value of information.
    BenchmarkConfig flat;
    flat.domain.noiseSlope = 0.0;
    flat.domain.noiseFloor = 0.01;
    flat.trials = 200;
    const std::vector<ControllerKind> pair{ControllerKind::MppiBelief, ControllerKind::CeMppi};
    const auto report = runBenchmark(flat, pair, threadCount());
    std::vector<double> a, b;
    for (const auto& t : report.trials) (t.controller == ControllerKind::MppiBelief ? a : b).push_back(t.cost);
    double df = 0.0;
    const double tStat = welchT(a, b, df);
    const double crit = tCritical99(df);
    v.check(std::abs(tStat) < crit, "simulator: with flat noise MPPI-Belief and CE-MPPI costs are indistinguishable "
                                    "(Welch t " + fmt("%.3f", tStat) + ", critical " + fmt("%.3f", crit) + ")");
  }

  {  // harness
    BenchmarkConfig config;
    config.trials = 4;
    config.trialDuration = 3.0;
    const auto one = runBenchmark(config, kAllKinds, 1);
    const auto many = runBenchmark(config, kAllKinds, 3);
    v.check(reportToJson(one, config).dump() == reportToJson(many, config).dump(),
            "harness: report identical for 1 and 3 worker threads");
    const fs::path dir = fs::temp_directory_path() / "beliefpi_acceptance_jsonl";
    writeBenchmark(dir, one, config);
    const auto again = aggregateJsonl(dir / "trials.jsonl");
    bool equal = again.size() == one.controllers.size();
    for (const auto& s : again) {
      const auto& ref = one.stats(s.controller);
      equal = equal && s.meanCost == ref.meanCost && s.stdCost == ref.stdCost && s.collisionRate == ref.collisionRate &&
              s.meanClearance == ref.meanClearance && s.meanBaseCost == ref.meanBaseCost && s.trials == ref.trials;
    }
    fs::remove_all(dir);
    v.check(equal, "harness: statistics recomputed from trials.jsonl equal the report");
  }
  return v.finish();
}

}  // namespace

int main(int argc, char** argv) {
  Args args;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--data" && i + 1 < argc) {
      args.data = argv[++i];
    } else if (a == "--cli" && i + 1 < argc) {
      args.cli = argv[++i];
    } else if (args.criterion.empty()) {
      args.criterion = a;
    } else {
      std::cerr << "unexpected argument '" << a << "'\n";
      return 2;
    }
  }
  const std::map<std::string, std::function<int()>> table{
      {"generate", [&] { return generate(args); }},
      {"1", criterion1},
      {"2", criterion2},
      {"3", criterion3},
      {"4", criterion4},
      {"5", [&] { return criterion5(args); }},
      {"6", [&] { return criterion6(args); }},
      {"7", [&] { return criterion7(args); }},
      {"8", [&] { return criterion8(args); }},
      {"9", criterion9},
  };
  const auto it = table.find(args.criterion);
  if (it == table.end()) {
    std::cerr << "usage: acceptance <1..9|generate> [--data DIR] [--cli PATH]\n";
    return 2;
  }
  try {
    return it->second();
  } catch (const std::exception& e) {
    std::cout << "FAIL criterion " << args.criterion << ": " << e.what() << std::endl;
    return 1;
  }
}
