#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sadrift/config.hpp"
#include "sadrift/drift.hpp"
#include "sadrift/gtd.hpp"
#include "sadrift/moreau.hpp"
#include "sadrift/rates.hpp"
#include "sadrift/sa.hpp"
#include "sadrift/schedule.hpp"

namespace sadrift {

// A config compiled into runnable pieces. The schedule is SA-normalized:
// alpha = a / beta unless the config passed alpha directly. When a forced
// xi breaks kappa u_xi/ell_xi < 1 the drift constants are absent; the
// verification suite reports the violation, everything needing them errors.
struct Experiment {
  ExperimentConfig config;
  GtdModel model;
  MoreauEnvelope envelope;
  Schedule schedule;
  std::optional<DriftConstants> constants;
  std::string hash;

  double alpha() const { return schedule.alpha; }
  bool xi_admissible() const { return constants.has_value(); }
  const DriftConstants& require_constants() const {
    if (!constants)
      throw ConfigError(
          "xi is inadmissible: kappa u_xi/ell_xi >= 1 breaks the smoothed "
          "contraction; lower envelope.xi or use automatic selection");
    return *constants;
  }
};

Experiment build_experiment(const ExperimentConfig& cfg);

// Shared RunOptions for a horizon: geometric checkpoints, configured init,
// optional dense range (inclusive).
RunOptions make_run_options(const Experiment& ex, long steps,
                            long dense_lo = 0, long dense_hi = -1);

// Checkpoint tracking bound to the experiment's envelope and constants.
// The experiment must outlive any run using the returned tracking.
Tracking make_tracking(const Experiment& ex);

struct PropertyResult {
  std::string name;
  bool pass = false;
  double worst = 0;  // worst violation; <= 0 when the property holds
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> results;
  bool all_pass = false;
};

// Envelope properties, Poisson residuals, contraction setup, and the mean
// drift probe, on the experiment's own model and envelope.
VerifyReport run_verification(const Experiment& ex);
void write_verify_report(const VerifyReport& report, const std::string& hash,
                         std::ostream& os);

}  // namespace sadrift
