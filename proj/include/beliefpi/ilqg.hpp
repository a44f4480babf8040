#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/controllers.hpp"
#include "beliefpi/costs.hpp"
#include "beliefpi/linalg.hpp"
#include "beliefpi/models.hpp"

namespace beliefpi {

struct IlqgOptions {
  int horizon = 30;
  double dt = 0.1;
  int maxIterations = 50;
  double tolerance = 1e-6;  // relative cost improvement
  double maxRegularization = 1e6;
};

template <SystemModel Model>
struct IlqgSolution {
  std::vector<typename Model::Control> controls;
  std::vector<typename Model::State> states;
  double cost = 0.0;
  int iterations = 0;  // accepted improving steps
  bool converged = false;
  bool flagged = false;  // regularization ladder exhausted
};

/// Iterative LQ trajectory optimization on the deterministic mean dynamics
///   x_{k+1} = x_k + (f(x_k) + G(x_k) u_k) dt
/// with cost sum_k (q_k(x_k) + 1/2 u^T R u) dt + phi(x_H). Levenberg
/// regularization on Q_uu climbs x10 from 1e-6 up to maxRegularization.
/// The control Jacobian of G is not linearized (G is taken as locally constant).
template <SystemModel Model>
class EkfIlqg {
 public:
  using Scalar = typename Model::Scalar;
  using State = typename Model::State;
  using Control = typename Model::Control;
  using StateMatrix = typename Model::StateMatrix;
  using ControlMatrix = typename Model::ControlMatrix;
  using ControlWeight = typename Model::ControlWeight;
  using Table = ReducedCostTable<Scalar, Model::kStateDim>;

  EkfIlqg(const Model& model, IlqgOptions options) : model_(model), options_(options) {
    if (options_.horizon < 1 || !(options_.dt > 0) || options_.maxIterations < 1) {
      throw ConfigError("ilqg: invalid horizon, dt or iteration cap");
    }
  }

  /// Solves from `mu0` starting at `initial` (zeros when empty).
  IlqgSolution<Model> solve(const State& mu0, const Table& table, const ControlWeight& r,
                            std::span<const Control> initial = {}) const {
    const int horizon = options_.horizon;
    IlqgSolution<Model> sol;
    sol.controls.assign(horizon, Control::Zero());
    if (!initial.empty()) {
      for (int k = 0; k < horizon && k < static_cast<int>(initial.size()); ++k) sol.controls[k] = initial[k];
    }
    sol.cost = rollout(mu0, table, r, sol.controls, sol.states);

    std::vector<Control> ff(horizon);
    std::vector<Eigen::Matrix<Scalar, Model::kControlDim, Model::kStateDim>> fb(horizon);
    std::vector<Control> trialControls(horizon);
    std::vector<State> trialStates;
    double reg = 0.0;

    for (int iter = 0; iter < options_.maxIterations; ++iter) {
      double dv1 = 0.0, dv2 = 0.0;
      if (!backward(sol, table, r, reg, ff, fb, dv1, dv2)) {
        reg = std::max(1e-6, reg * 10.0);
        if (reg > options_.maxRegularization) {
          sol.flagged = true;
          return sol;
        }
        continue;
      }
      if (-dv1 < 1e-12 * std::max(1.0, std::abs(sol.cost))) {
        sol.converged = true;
        return sol;
      }

      bool accepted = false;
      double newCost = sol.cost;
      for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
        State x = mu0;
        for (int k = 0; k < horizon; ++k) {
          trialControls[k] = sol.controls[k] + alpha * ff[k] + fb[k] * (x - sol.states[k]);
          x = step(x, trialControls[k]);
        }
        newCost = rollout(mu0, table, r, trialControls, trialStates);
        const double expected = -(alpha * dv1 + alpha * alpha * dv2);
        if (std::isfinite(newCost) && newCost < sol.cost && (sol.cost - newCost) > 1e-4 * expected) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        reg = std::max(1e-6, reg * 10.0);
        if (reg > options_.maxRegularization) {
          sol.flagged = true;
          return sol;
        }
        continue;
      }

      const double improvement = (sol.cost - newCost) / std::max(std::abs(sol.cost), 1e-300);
      sol.controls.swap(trialControls);
      sol.states.swap(trialStates);
      sol.cost = newCost;
      ++sol.iterations;
      reg = reg > 1e-6 ? reg / 10.0 : 0.0;
      if (improvement < options_.tolerance) {
        sol.converged = true;
        return sol;
      }
    }
    return sol;
  }

  /// Receding-horizon use: warm-starts from the previous solution shifted by one step.
  ControllerOutput<Control> plan(const State& mu0, const CostSpecFor<Model>& spec) {
    std::vector<typename Table::StateMatrix> zeros(options_.horizon + 1, StateMatrix::Zero());
    const Table table(spec, std::span<const StateMatrix>(zeros), spec.theta);
    std::vector<Control> init;
    if (!warm_.empty()) {
      init.assign(warm_.begin() + 1, warm_.end());
      init.push_back(warm_.back());
    }
    auto sol = solve(mu0, table, spec.controlWeight, init);
    warm_ = sol.controls;
    ControllerOutput<Control> out;
    out.control = sol.controls.front();
    out.effectiveSampleSize = 1.0;
    out.minCost = out.maxCost = sol.cost;
    out.degenerate = sol.flagged;
    out.iterations = sol.iterations;
    return out;
  }

  void reset() { warm_.clear(); }

 private:
  State step(const State& x, const Control& u) const {
    return x + (model_.drift(x) + model_.controlMatrix(x) * u) * options_.dt;
  }

  double rollout(const State& mu0, const Table& table, const ControlWeight& r, const std::vector<Control>& controls,
                 std::vector<State>& states) const {
    const double dt = options_.dt;
    states.resize(controls.size() + 1);
    states[0] = mu0;
    double cost = 0.0;
    for (std::size_t k = 0; k < controls.size(); ++k) {
      cost += (table.running(static_cast<int>(k), states[k]) + 0.5 * controls[k].dot(r * controls[k])) * dt;
      states[k + 1] = step(states[k], controls[k]);
    }
    return cost + table.terminal(states.back());
  }

  bool backward(const IlqgSolution<Model>& sol, const Table& table, const ControlWeight& r, double reg,
                std::vector<Control>& ff, std::vector<Eigen::Matrix<Scalar, Model::kControlDim, Model::kStateDim>>& fb,
                double& dv1, double& dv2) const {
    constexpr int L = Model::kControlDim;
    const double dt = options_.dt;
    const int horizon = options_.horizon;
    State vx;
    StateMatrix vxx;
    table.terminalDerivatives(sol.states[horizon], vx, vxx);
    dv1 = dv2 = 0.0;
    for (int k = horizon - 1; k >= 0; --k) {
      const State& x = sol.states[k];
      const Control& u = sol.controls[k];
      State lx;
      StateMatrix lxx;
      table.runningDerivatives(k, x, lx, lxx);
      lx *= dt;
      lxx *= dt;
      const StateMatrix fx = StateMatrix::Identity() + model_.driftJacobian(x) * dt;
      const ControlMatrix fu = model_.controlMatrix(x) * dt;

      const State qx = lx + fx.transpose() * vx;
      const Control qu = r * u * dt + fu.transpose() * vx;
      const StateMatrix qxx = lxx + fx.transpose() * vxx * fx;
      Eigen::Matrix<Scalar, L, L> quu = r * dt + fu.transpose() * vxx * fu;
      const Eigen::Matrix<Scalar, L, Model::kStateDim> qux = fu.transpose() * vxx * fx;
      quu = symmetrize(quu);

      const Eigen::Matrix<Scalar, L, L> quuReg = quu + reg * Eigen::Matrix<Scalar, L, L>::Identity();
      Eigen::LLT<Eigen::Matrix<Scalar, L, L>> llt(quuReg);
      if (llt.info() != Eigen::Success) return false;
      ff[k] = -llt.solve(qu);
      fb[k] = -llt.solve(qux);

      dv1 += ff[k].dot(qu);
      dv2 += 0.5 * ff[k].dot(quu * ff[k]);
      vx = qx + fb[k].transpose() * quu * ff[k] + fb[k].transpose() * qu + qux.transpose() * ff[k];
      vxx = symmetrize(StateMatrix(qxx + fb[k].transpose() * quu * fb[k] + fb[k].transpose() * qux +
                                   qux.transpose() * fb[k]));
    }
    return true;
  }

  Model model_;
  IlqgOptions options_;
  std::vector<Control> warm_;
};

}  // namespace beliefpi
