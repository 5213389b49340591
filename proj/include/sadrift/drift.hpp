#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "sadrift/moreau.hpp"
#include "sadrift/sa.hpp"
#include "sadrift/schedule.hpp"

namespace sadrift {

// Everything drift certification needs on top of the plain SA interface:
// the Poisson solution H_theta of
//   H_theta(y) - (P H_theta)(y) = F(theta, y) - f(theta)
// and the Lipschitz constants of F and H in the contraction norm.
class DriftModel : public SaModel {
 public:
  virtual Eigen::VectorXd poisson_eval(const Eigen::VectorXd& theta,
                                       int y) const = 0;  // H_theta(y)
  virtual Eigen::VectorXd poisson_predicted(const Eigen::VectorXd& theta,
                                            int y) const = 0;  // (P H_theta)(y)
  virtual double kappa() const = 0;
  virtual double lip_F() const = 0;
  virtual double lip_H() const = 0;
};

// All constants of the shifted-energy drift inequality, computed from
// (L_F, L_H, kappa) and the envelope.
struct DriftConstants {
  double xi = 0, kappa = 0;
  double ell = 0, u = 0, ell_xi = 0, u_xi = 0;
  double mu = 0;
  double L_F = 0, L_H = 0;
  double K_xi = 0;
  double K = 0;  // K_xi unless overridden
  double C_xi = 0, Cp_xi = 0, Cp_xiK = 0, C_xiK = 0;
  double alpha_bar = 0;
  long N_tail = 0;
};

DriftConstants compute_constants(const DriftModel& model,
                                 const MoreauEnvelope& env,
                                 const Schedule& sched);

// V_n = M_xi(e_n) + alpha_n <grad M_xi(e_n), H_theta(y_n)> + K alpha_n^2.
double shifted_energy(const DriftModel& model, const MoreauEnvelope& env,
                      double K, const Schedule& sched, long n,
                      const Eigen::VectorXd& theta, int y);

// E[V_{n+1} | F_n] as an exact finite sum over successor windows:
// theta_{n+1} is F_n-measurable, and the expectation over Y_{n+1} is the
// one-step prediction of the Poisson term.
double exact_conditional_expectation(const DriftModel& model,
                                     const MoreauEnvelope& env, double K,
                                     const Schedule& sched, long n,
                                     const Eigen::VectorXd& theta, int y);

inline constexpr double kDriftTolerance = 1e-9;

struct StepCheck {
  long n = 0;
  double v_n = 0;
  double coercivity_floor = 0;  // 0.25 |e_n|_{m,xi}^2
  double e_v_next = 0;
  double rhs_bound = 0;
  double slack = 0;  // rhs_bound - e_v_next
  bool coercive = false;
  bool ok = false;
};

struct DriftCertificate {
  DriftConstants constants;
  long window_lo = 0, window_hi = 0;
  std::vector<StepCheck> steps;
  double min_slack = 0;
  double min_coercivity_margin = 0;
  bool coercivity_ok = false;
  bool drift_ok = false;
  bool pass = false;              // every step in the window passes
  long first_passing_index = -1;  // earliest n from which all later steps pass
};

// Checks coercivity and the one-step drift bound at every n in
// [constants.N_tail, constants.N_tail + window_steps]. The trajectory must
// carry dense records over that range. Steps are certified independently;
// the parallel kernel and the serial reference agree bit for bit.
DriftCertificate certify_drift(const Trajectory& traj, const DriftModel& model,
                               const MoreauEnvelope& env,
                               const DriftConstants& constants,
                               const Schedule& sched, long window_steps);
DriftCertificate certify_drift_serial(const Trajectory& traj,
                                      const DriftModel& model,
                                      const MoreauEnvelope& env,
                                      const DriftConstants& constants,
                                      const Schedule& sched,
                                      long window_steps);

void write_certificate(const DriftCertificate& cert, std::ostream& os);

// Deterministic scalar recursion x_{n+1} = (1 - c0 a_n + C0 r_n) x_n + C0 r_n.
// The decay witness passes when the tail max of (n+1)^zeta x_n over the last
// decade is at most half of the previous decade's.
struct ScalarRecursionResult {
  bool passes = false;
  bool outside_theory = false;
  double tail_max_last = 0;
  double tail_max_prev = 0;
};
ScalarRecursionResult scalar_recursion_oracle(double c0, double C0,
                                              const Schedule& sched,
                                              double zeta, double x0,
                                              long n_steps);

// Numeric witnesses for the weighted almost-supermartingale conditions on
// gamma_n = 1 - (q_{n+1}/q_n)(1 - beta_n):
//   (a) 0 <= gamma_n <= 1 on a tail,
//   (b) sum gamma_n diverges (harmonic-coefficient growth witness),
//   (c) sum q_{n+1} b_n converges (absolute tail below 1e-8, or consecutive
//       decade sums decaying by factor <= 0.9).
struct WeightedRsResult {
  bool range_ok = false;
  bool divergence_ok = false;
  bool summable_ok = false;
  bool conditions_ok = false;
  long tail_start = 0;
  double min_harmonic_coeff = 0;  // min over the tail of (n+1) gamma_n
  double partial_sum = 0;
  double required_growth = 0;
  double tail_sum = 0;
  double decade_ratio = 0;
  std::vector<double> gamma_head;
};
WeightedRsResult weighted_rs_check(const std::function<double(long)>& beta,
                                   const std::function<double(long)>& b,
                                   const std::function<double(long)>& q,
                                   long N);

}  // namespace sadrift
