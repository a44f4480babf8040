#include "beliefpi/light_dark.hpp"

#include <algorithm>
#include <limits>

namespace beliefpi {

double clearance(const Eigen::Vector2d& position, const std::vector<Obstacle>& obstacles) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) best = std::min(best, (position - o.center).norm() - o.radius);
  return best;
}

void LightDarkParams::validate() const {
  if (!(noiseFloor > 0.0)) throw ConfigError("light-dark: noise floor must be positive");
  if (!(processStd >= 0.0)) throw ConfigError("light-dark: process noise std must be non-negative");
  if (!(noiseSlope >= 0.0) || !std::isfinite(noiseSlope)) throw ConfigError("light-dark: noise slope must be non-negative");
  if (!std::isfinite(lightX)) throw ConfigError("light-dark: light position must be finite");
  for (const auto& o : obstacles) {
    if (!(o.radius > 0.0) || !o.center.allFinite()) throw ConfigError("light-dark: invalid obstacle");
  }
}

}  // namespace beliefpi
