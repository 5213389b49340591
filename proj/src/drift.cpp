#include "sadrift/drift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "sadrift/errors.hpp"

namespace sadrift {

DriftConstants compute_constants(const DriftModel& model,
                                 const MoreauEnvelope& env,
                                 const Schedule& sched) {
  DriftConstants c;
  c.xi = env.xi();
  c.kappa = model.kappa();
  std::tie(c.ell, c.u) = env.base().equivalence_constants();
  c.ell_xi = env.ell_xi();
  c.u_xi = env.u_xi();
  c.mu = mu_xi(c.kappa, env);
  c.L_F = model.lip_F();
  c.L_H = model.lip_H();
  c.alpha_bar = sched.rate(0);

  const double growth_H = c.L_H * (c.u_xi + 1.0) / c.ell_xi;
  const double growth_F = c.L_F * (c.u_xi + 1.0) / c.ell_xi;
  c.K_xi = 2.0 * growth_H * growth_H;
  c.K = c.K_xi;

  const double sq = (c.u_xi + 1.0) * (c.u_xi + 1.0) / (c.xi * c.ell * c.ell);
  c.C_xi = c.L_F * c.L_F * sq +
           2.0 * c.L_F * c.L_H *
               (sq + c.u * (c.u_xi + 1.0) / (c.ell_xi * c.ell) *
                         (1.0 + c.alpha_bar * growth_F));
  c.Cp_xi = 2.0 * growth_H * (1.0 + growth_F) * (2.0 + growth_F);
  c.Cp_xiK = 2.0 * growth_H + c.K;
  c.C_xiK = 4.0 * (c.C_xi + c.Cp_xi + c.mu * c.Cp_xiK);

  // First n with alpha_n <= 1 and growth_H * alpha_n <= 1/8. For tiny eta
  // the index can exceed any feasible horizon; saturate instead of
  // overflowing (certification then reports the window/horizon mismatch).
  double bound = 1.0;
  if (growth_H > 0.0) bound = std::fmin(bound, 0.125 / growth_H);
  constexpr long kTailCap = 1000000000000000L;  // 1e15
  long n = 0;
  if (sched.alpha > bound) {
    const double estimate =
        std::pow(sched.alpha / bound, 1.0 / sched.eta) - 1.0;
    if (!(estimate < static_cast<double>(kTailCap))) {
      c.N_tail = kTailCap;
      return c;
    }
    n = std::max(static_cast<long>(std::ceil(estimate)), 0L);
  }
  while (n > 0 && sched.rate(n - 1) <= bound) --n;
  while (sched.rate(n) > bound) ++n;
  c.N_tail = n;
  return c;
}

double shifted_energy(const DriftModel& model, const MoreauEnvelope& env,
                      double K, const Schedule& sched, long n,
                      const Eigen::VectorXd& theta, int y) {
  const double a_n = sched.rate(n);
  const Eigen::VectorXd e = theta - model.theta_star();
  return env.envelope(e) +
         a_n * env.gradient(e).dot(model.poisson_eval(theta, y)) +
         K * a_n * a_n;
}

double exact_conditional_expectation(const DriftModel& model,
                                     const MoreauEnvelope& env, double K,
                                     const Schedule& sched, long n,
                                     const Eigen::VectorXd& theta, int y) {
  const double a_n = sched.rate(n);
  const double a_next = sched.rate(n + 1);
  const Eigen::VectorXd theta_next = theta + a_n * model.update(theta, y);
  const Eigen::VectorXd e_next = theta_next - model.theta_star();
  return env.envelope(e_next) +
         a_next *
             env.gradient(e_next).dot(model.poisson_predicted(theta_next, y)) +
         K * a_next * a_next;
}

namespace {

StepCheck check_step(const DriftModel& model, const MoreauEnvelope& env,
                     const DriftConstants& c, const Schedule& sched,
                     const DenseRecord& rec) {
  StepCheck s;
  s.n = rec.n;
  const Eigen::VectorXd e = rec.theta - model.theta_star();
  const double m = env.m_norm(e);
  s.coercivity_floor = 0.25 * m * m;
  s.v_n = shifted_energy(model, env, c.K, sched, rec.n, rec.theta, rec.window);
  s.coercive = s.v_n >= s.coercivity_floor - kDriftTolerance;
  s.e_v_next = exact_conditional_expectation(model, env, c.K, sched, rec.n,
                                             rec.theta, rec.window);
  const double a_n = sched.rate(rec.n);
  const double r_n = sched.perturbation(rec.n);
  s.rhs_bound = (1.0 - c.mu * a_n + c.C_xiK * r_n) * s.v_n + c.C_xiK * r_n;
  s.slack = s.rhs_bound - s.e_v_next;
  s.ok = s.coercive && s.slack >= -kDriftTolerance;
  return s;
}

DriftCertificate certify_impl(const Trajectory& traj, const DriftModel& model,
                              const MoreauEnvelope& env,
                              const DriftConstants& c, const Schedule& sched,
                              long window_steps, bool parallel) {
  DriftCertificate cert;
  cert.constants = c;
  cert.window_lo = c.N_tail;
  cert.window_hi = c.N_tail + window_steps;

  // Locate the dense segment covering the window.
  if (traj.dense.empty())
    throw InputError("certify_drift: trajectory has no dense records");
  const long base_n = traj.dense.front().n;
  const long offset = cert.window_lo - base_n;
  const long count = cert.window_hi - cert.window_lo + 1;
  if (offset < 0 ||
      offset + count > static_cast<long>(traj.dense.size()))
    throw InputError("certify_drift: trajectory is not dense over the "
                     "certification window [" +
                     std::to_string(cert.window_lo) + ", " +
                     std::to_string(cert.window_hi) + "]");
  for (long i = 0; i < count; ++i)
    if (traj.dense[offset + i].n != cert.window_lo + i)
      throw InputError("certify_drift: dense records are not consecutive");

  cert.steps.resize(count);
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < count; ++i)
    cert.steps[i] = check_step(model, env, c, sched, traj.dense[offset + i]);

  cert.min_slack = std::numeric_limits<double>::infinity();
  cert.min_coercivity_margin = std::numeric_limits<double>::infinity();
  cert.coercivity_ok = true;
  cert.drift_ok = true;
  long first_pass = cert.window_hi + 1;
  for (long i = count - 1; i >= 0; --i) {
    const StepCheck& s = cert.steps[i];
    cert.min_slack = std::fmin(cert.min_slack, s.slack);
    cert.min_coercivity_margin =
        std::fmin(cert.min_coercivity_margin, s.v_n - s.coercivity_floor);
    cert.coercivity_ok = cert.coercivity_ok && s.coercive;
    cert.drift_ok = cert.drift_ok && s.slack >= -kDriftTolerance;
    if (s.ok)
      first_pass = s.n;
    else
      break;
  }
  cert.first_passing_index = first_pass <= cert.window_hi ? first_pass : -1;
  cert.pass = cert.coercivity_ok && cert.drift_ok;
  return cert;
}

}  // namespace

DriftCertificate certify_drift(const Trajectory& traj, const DriftModel& model,
                               const MoreauEnvelope& env,
                               const DriftConstants& constants,
                               const Schedule& sched, long window_steps) {
  return certify_impl(traj, model, env, constants, sched, window_steps, true);
}

DriftCertificate certify_drift_serial(const Trajectory& traj,
                                      const DriftModel& model,
                                      const MoreauEnvelope& env,
                                      const DriftConstants& constants,
                                      const Schedule& sched,
                                      long window_steps) {
  return certify_impl(traj, model, env, constants, sched, window_steps, false);
}

void write_certificate(const DriftCertificate& cert, std::ostream& os) {
  char buf[1024];
  const DriftConstants& c = cert.constants;
  os << "drift certificate\n";
  std::snprintf(buf, sizeof buf,
                "window = [%ld, %ld]\n"
                "xi = %.17g\nkappa = %.17g\nell = %.17g\nu = %.17g\n"
                "ell_xi = %.17g\nu_xi = %.17g\nmu = %.17g\n"
                "L_F = %.17g\nL_H = %.17g\nK_xi = %.17g\nK = %.17g\n"
                "C_xi = %.17g\nCp_xi = %.17g\nCp_xiK = %.17g\nC_xiK = %.17g\n"
                "alpha_bar = %.17g\nN_tail = %ld\n",
                cert.window_lo, cert.window_hi, c.xi, c.kappa, c.ell, c.u,
                c.ell_xi, c.u_xi, c.mu, c.L_F, c.L_H, c.K_xi, c.K, c.C_xi,
                c.Cp_xi, c.Cp_xiK, c.C_xiK, c.alpha_bar, c.N_tail);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "min_slack = %.17g\nmin_coercivity_margin = %.17g\n"
                "coercivity_ok = %d\ndrift_ok = %d\npass = %d\n"
                "first_passing_index = %ld\n",
                cert.min_slack, cert.min_coercivity_margin,
                cert.coercivity_ok ? 1 : 0, cert.drift_ok ? 1 : 0,
                cert.pass ? 1 : 0, cert.first_passing_index);
  os << buf;
  os << "n,V_n,E_n_V_next,rhs_bound,slack,coercivity_ok\n";
  for (const StepCheck& s : cert.steps) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%d\n", s.n,
                  s.v_n, s.e_v_next, s.rhs_bound, s.slack, s.coercive ? 1 : 0);
    os << buf;
  }
}

ScalarRecursionResult scalar_recursion_oracle(double c0, double C0,
                                              const Schedule& sched,
                                              double zeta, double x0,
                                              long n_steps) {
  if (!(c0 > 0.0)) throw InputError("scalar_recursion_oracle: c0 must be positive");
  if (n_steps < 100) throw InputError("scalar_recursion_oracle: horizon too short");

  ScalarRecursionResult res;
  const double zeta_sup =
      sched.eta < 1.0 ? 2.0 * sched.eta - 1.0
                      : std::fmin(1.0, c0 * sched.alpha);
  res.outside_theory = !(zeta >= 0.0 && zeta < zeta_sup);

  const long last_lo = n_steps / 10;
  const long prev_lo = n_steps / 100;
  double x = x0;
  double max_last = 0.0, max_prev = 0.0;
  for (long n = 0; n <= n_steps; ++n) {
    if (n >= prev_lo) {
      const double weighted = std::pow(n + 1.0, zeta) * x;
      if (n >= last_lo)
        max_last = std::fmax(max_last, weighted);
      else
        max_prev = std::fmax(max_prev, weighted);
    }
    if (n == n_steps) break;
    const double a_n = sched.rate(n);
    const double r_n = sched.perturbation(n);
    x = (1.0 - c0 * a_n + C0 * r_n) * x + C0 * r_n;
  }
  res.tail_max_last = max_last;
  res.tail_max_prev = max_prev;
  res.passes = std::isfinite(max_last) && std::isfinite(max_prev) &&
               max_last <= 0.5 * max_prev;
  return res;
}

WeightedRsResult weighted_rs_check(const std::function<double(long)>& beta,
                                   const std::function<double(long)>& b,
                                   const std::function<double(long)>& q,
                                   long N) {
  if (N < 1000) throw InputError("weighted_rs_check: horizon too short");
  WeightedRsResult res;

  const auto gamma = [&](long n) {
    return 1.0 - (q(n + 1) / q(n)) * (1.0 - beta(n));
  };

  long last_violation = -1;
  for (long n = 0; n <= N; ++n) {
    const double g = gamma(n);
    if (static_cast<long>(res.gamma_head.size()) < 512)
      res.gamma_head.push_back(g);
    if (!(g >= 0.0 && g <= 1.0)) last_violation = n;
  }
  res.tail_start = last_violation + 1;
  res.range_ok = res.tail_start <= N / 2;

  res.min_harmonic_coeff = std::numeric_limits<double>::infinity();
  res.partial_sum = 0.0;
  for (long n = res.tail_start; n <= N; ++n) {
    const double g = gamma(n);
    res.partial_sum += g;
    res.min_harmonic_coeff = std::fmin(res.min_harmonic_coeff, (n + 1.0) * g);
  }
  res.required_growth =
      res.min_harmonic_coeff * std::log((N + 1.0) / (res.tail_start + 1.0));
  res.divergence_ok = res.min_harmonic_coeff > 0.0 &&
                      res.partial_sum + 1e-12 >= res.required_growth;

  // Summability: decade sums of q_{n+1} b_n.
  res.tail_sum = 0.0;
  bool nonneg = true;
  std::vector<double> decade_sums;
  long decade_hi = 10;
  double acc = 0.0;
  for (long n = 1; n <= N; ++n) {
    const double term = q(n + 1) * b(n);
    if (term < 0.0) nonneg = false;
    if (n >= N / 2) res.tail_sum += term;
    if (n >= decade_hi) {
      decade_sums.push_back(acc);
      acc = 0.0;
      decade_hi *= 10;
    }
    acc += term;
  }
  res.decade_ratio = std::numeric_limits<double>::infinity();
  if (decade_sums.size() >= 3) {
    const std::size_t k = decade_sums.size();
    const double r1 = decade_sums[k - 2] > 0.0
                          ? decade_sums[k - 1] / decade_sums[k - 2]
                          : 0.0;
    const double r2 = decade_sums[k - 3] > 0.0
                          ? decade_sums[k - 2] / decade_sums[k - 3]
                          : 0.0;
    res.decade_ratio = std::fmax(r1, r2);
  }
  res.summable_ok =
      nonneg && (res.tail_sum < 1e-8 || res.decade_ratio <= 0.9);
  res.conditions_ok = res.range_ok && res.divergence_ok && res.summable_ok;
  return res;
}

}  // namespace sadrift
