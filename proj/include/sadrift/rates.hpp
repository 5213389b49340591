#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sadrift/sa.hpp"

namespace sadrift {

enum class ErrorNormChoice { contraction, euclid, mnorm };
ErrorNormChoice parse_error_norm(const std::string& name);

// Decay witness for the weighted squared error s_n = (n+1)^zeta |e_n|^2:
// pass when the max of s_n over the last decade of checkpoints is at most
// 0.7 times the max over the decade before. The witness is monotone in zeta.
struct PathwiseStats {
  std::uint64_t seed = 0;
  double zeta = 0;
  double tail_max_last = 0;
  double tail_max_prev = 0;
  double decay_ratio = 0;
  bool pass = false;
};
PathwiseStats pathwise_rate(const Trajectory& traj, double zeta,
                            ErrorNormChoice which, long burn_in = 100);

struct EnsemblePathwise {
  double zeta = 0;
  bool outside_theory = false;
  int n_pass = 0;
  int n_seeds = 0;
  double pass_fraction = 0;
  std::vector<PathwiseStats> per_seed;
};
EnsemblePathwise pathwise_ensemble(const std::vector<Trajectory>& ensemble,
                                   double zeta,
                                   std::pair<double, double> zeta_window,
                                   ErrorNormChoice which, long burn_in = 100);

struct SlopeFit {
  double slope = 0;
  double stderr_ = 0;
  double intercept = 0;
  int points = 0;
};
// Least squares of log y on log x.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct L2Report {
  double eta = 0;
  double target_slope = 0;
  SlopeFit fit;
  long n_lo = 0, n_hi = 0;
  int n_seeds = 0;
  bool log_corrected = false;  // model mean = C log(n)/n when mu alpha == 1
  bool degenerate = false;     // nonpositive means; slope reported as -inf
  std::vector<long> ns;
  std::vector<double> mean_sq;
};
// Sample-mean squared error across the ensemble at shared checkpoints,
// fitted over [n_lo, n_hi]. mu_alpha sets the eta == 1 target
// -min(mu alpha, 1) and triggers the log-corrected fit at mu alpha == 1.
L2Report l2_slope(const std::vector<Trajectory>& ensemble,
                  ErrorNormChoice which, double eta, long n_lo, long n_hi,
                  double mu_alpha);

// Admissible zeta interval (0, hi); hi == 0 means the pathwise window is
// empty (eta <= 1/2).
std::pair<double, double> rate_window(double eta, double kappa,
                                      double alpha_eff);

}  // namespace sadrift
