#pragma once

#include <cmath>

#include "sadrift/errors.hpp"

namespace sadrift {

// Power-law learning rate alpha_n = alpha / (n+1)^eta.
struct Schedule {
  double alpha = 1.0;
  double eta = 1.0;

  Schedule() = default;
  // alpha = 0 freezes the iterates, useful as a null case in tests.
  Schedule(double alpha_, double eta_) : alpha(alpha_), eta(eta_) {
    if (!(alpha >= 0.0))
      throw ConfigError("schedule: alpha must be nonnegative");
    if (!(eta > 0.0 && eta <= 1.0))
      throw ConfigError("schedule: eta must lie in (0, 1]");
  }

  double rate(long n) const { return alpha / std::pow(n + 1.0, eta); }

  // r_n = alpha_n^2 + |alpha_{n+1} - alpha_n|
  double perturbation(long n) const {
    const double a0 = rate(n);
    const double a1 = rate(n + 1);
    return a0 * a0 + std::abs(a1 - a0);
  }
};

}  // namespace sadrift
