#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "beliefpi/models.hpp"

namespace beliefpi {

struct Obstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

/// Signed distance from `position` to the nearest obstacle boundary
/// (negative inside a disc). +inf when there are no obstacles.
double clearance(const Eigen::Vector2d& position, const std::vector<Obstacle>& obstacles);

struct LightDarkParams {
  double lightX = 5.0;       // m, where observations are sharpest
  double noiseFloor = 0.1;   // sigma_o at the light
  double processStd = 0.30;  // sigma_w on the velocity channels
  std::vector<Obstacle> obstacles{{Eigen::Vector2d(3.0, 1.0), 0.65}, {Eigen::Vector2d(3.0, -1.0), 0.65}};
  double noiseSlope = 0.70710678118654752;  // d sigma_o / d|px - lightX|

  void validate() const;
};

/// Planar double integrator x = [px, py, vx, vy] with position observations
/// whose noise grows linearly with distance from the light column px = lightX.
class LightDarkDomain : public ModelTypes<double, 4, 2, 2, 2> {
 public:
  LightDarkDomain() = default;
  explicit LightDarkDomain(LightDarkParams params) : params_(std::move(params)) { params_.validate(); }

  const LightDarkParams& params() const { return params_; }
  const std::vector<Obstacle>& obstacles() const { return params_.obstacles; }

  State drift(const State& x) const { return State(x(2), x(3), 0.0, 0.0); }

  ControlMatrix controlMatrix(const State&) const {
    ControlMatrix g = ControlMatrix::Zero();
    g.bottomRows<2>().setIdentity();
    return g;
  }

  Observation observation(const State& x) const { return x.head<2>(); }

  StateMatrix driftJacobian(const State&) const {
    StateMatrix a = StateMatrix::Zero();
    a.topRightCorner<2, 2>().setIdentity();
    return a;
  }

  ObsJacobian observationJacobian(const State&) const {
    ObsJacobian c = ObsJacobian::Zero();
    c.leftCols<2>().setIdentity();
    return c;
  }

  double noiseScale(double px) const {
    return params_.noiseSlope * std::abs(px - params_.lightX) + params_.noiseFloor;
  }

  // Isotropic on both observation channels.
  ObsMatrix observationNoise(const State& x) const { return noiseScale(x(0)) * ObsMatrix::Identity(); }

  NoiseChannel processNoiseChannel() const {
    NoiseChannel h = NoiseChannel::Zero();
    h.bottomRows<2>() = params_.processStd * Eigen::Matrix2d::Identity();
    return h;
  }

 private:
  LightDarkParams params_;
};

static_assert(SystemModel<LightDarkDomain>);

}  // namespace beliefpi
