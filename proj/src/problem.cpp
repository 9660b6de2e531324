#include "mfc/problem.hpp"

#include <cmath>

namespace mfc {

Real ProblemSpec::running_weight(int step) const {
  return std::exp(-discount * step * dt) * dt;
}

Real ProblemSpec::terminal_weight() const {
  return infinite_horizon ? std::exp(-discount * horizon * dt) : 1.0;
}

void ProblemSpec::validate() const {
  if (space.dim < 1) throw ConfigError(name + ": state dimension must be >= 1");
  if (control_dim < 1 || noise_dim < 1)
    throw ConfigError(name + ": control and noise dimensions must be >= 1");
  if (horizon < 1) throw ConfigError(name + ": horizon must be >= 1 step");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError(name + ": dt must be positive");
  if (!(discount >= 0.0)) throw ConfigError(name + ": discount must be >= 0");
  if (!drift || !diffusion || !running_cost)
    throw ConfigError(name + ": drift, diffusion and running cost are required");
}

}  // namespace mfc
