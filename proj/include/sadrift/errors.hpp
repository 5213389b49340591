#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sadrift {

// Error taxonomy, mapped to CLI exit codes: configuration/input/structure
// problems exit 2, numerical trouble (divergence, singular solves) exits 3.
// Verification failures are reported values, not exceptions.

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chain/MDP structure violations (reducibility, periodicity, coverage).
struct StructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Compiled-model defects (singular mean matrix, non-Hurwitz mean map).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : NumericalError {
  DivergenceError(std::uint64_t seed_, long step_, double norm_)
      : NumericalError("iterate diverged (seed " + std::to_string(seed_) +
                       ", step " + std::to_string(step_) + ", |theta| = " +
                       std::to_string(norm_) + ")"),
        seed(seed_), step(step_), norm(norm_) {}
  std::uint64_t seed;
  long step;
  double norm;
};

}  // namespace sadrift
