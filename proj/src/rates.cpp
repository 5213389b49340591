#include "sadrift/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sadrift/errors.hpp"

namespace sadrift {

ErrorNormChoice parse_error_norm(const std::string& name) {
  if (name == "gtd" || name == "contraction") return ErrorNormChoice::contraction;
  if (name == "euclid") return ErrorNormChoice::euclid;
  if (name == "mnorm") return ErrorNormChoice::mnorm;
  throw ConfigError("unknown error norm '" + name +
                    "' (expected gtd, euclid, or mnorm)");
}

namespace {

double error_of(const CheckpointRecord& r, ErrorNormChoice which) {
  switch (which) {
    case ErrorNormChoice::contraction: return r.err_contraction;
    case ErrorNormChoice::euclid: return r.err_euclid;
    case ErrorNormChoice::mnorm: return r.err_mnorm;
  }
  return 0.0;
}

}  // namespace

PathwiseStats pathwise_rate(const Trajectory& traj, double zeta,
                            ErrorNormChoice which, long burn_in) {
  if (traj.checkpoints.empty())
    throw InputError("pathwise_rate: trajectory has no checkpoints");
  const long n_hi = traj.checkpoints.back().n;
  if (n_hi < burn_in * 1000)
    throw InputError("pathwise_rate: checkpoints must span three decades "
                     "past burn-in; need a horizon of at least " +
                     std::to_string(burn_in * 1000));
  const long split = n_hi / 10;
  const long prev_lo = n_hi / 100;

  PathwiseStats st;
  st.seed = traj.seed;
  st.zeta = zeta;
  double max_last = 0.0, max_prev = 0.0;
  for (const CheckpointRecord& r : traj.checkpoints) {
    if (r.n < prev_lo) continue;
    const double err = error_of(r, which);
    const double s = std::pow(r.n + 1.0, zeta) * err * err;
    if (r.n >= split)
      max_last = std::fmax(max_last, s);
    else
      max_prev = std::fmax(max_prev, s);
  }
  st.tail_max_last = max_last;
  st.tail_max_prev = max_prev;
  st.decay_ratio = max_prev > 0.0
                       ? max_last / max_prev
                       : (max_last > 0.0
                              ? std::numeric_limits<double>::infinity()
                              : 0.0);
  st.pass = st.decay_ratio <= 0.7;
  return st;
}

EnsemblePathwise pathwise_ensemble(const std::vector<Trajectory>& ensemble,
                                   double zeta,
                                   std::pair<double, double> zeta_window,
                                   ErrorNormChoice which, long burn_in) {
  EnsemblePathwise out;
  out.zeta = zeta;
  out.outside_theory = !(zeta > zeta_window.first && zeta < zeta_window.second);
  out.n_seeds = static_cast<int>(ensemble.size());
  for (const Trajectory& t : ensemble) {
    out.per_seed.push_back(pathwise_rate(t, zeta, which, burn_in));
    if (out.per_seed.back().pass) ++out.n_pass;
  }
  out.pass_fraction =
      out.n_seeds > 0 ? static_cast<double>(out.n_pass) / out.n_seeds : 0.0;
  return out;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw InputError("fit_loglog: need at least three points");
  const int m = static_cast<int>(x.size());
  double sx = 0, sy = 0;
  std::vector<double> lx(m), ly(m);
  for (int i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw InputError("fit_loglog: inputs must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_resid = 0;
  for (int i = 0; i < m; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_resid += r * r;
  }
  fit.stderr_ = m > 2 ? std::sqrt(ss_resid / (m - 2) / sxx) : 0.0;
  return fit;
}

L2Report l2_slope(const std::vector<Trajectory>& ensemble,
                  ErrorNormChoice which, double eta, long n_lo, long n_hi,
                  double mu_alpha) {
  if (ensemble.empty()) throw InputError("l2_slope: empty ensemble");
  const std::size_t n_ck = ensemble.front().checkpoints.size();
  for (const Trajectory& t : ensemble)
    if (t.checkpoints.size() != n_ck)
      throw InputError("l2_slope: ensemble checkpoints differ across seeds");

  L2Report rep;
  rep.eta = eta;
  rep.n_lo = n_lo;
  rep.n_hi = n_hi;
  rep.n_seeds = static_cast<int>(ensemble.size());
  const bool harmonic = eta == 1.0;
  rep.log_corrected = harmonic && std::abs(mu_alpha - 1.0) < 1e-12;
  rep.target_slope = harmonic ? -std::fmin(mu_alpha, 1.0) : -eta;

  for (std::size_t i = 0; i < n_ck; ++i) {
    const long n = ensemble.front().checkpoints[i].n;
    double acc = 0.0;
    for (const Trajectory& t : ensemble) {
      const double e = error_of(t.checkpoints[i], which);
      acc += e * e;
    }
    rep.ns.push_back(n);
    rep.mean_sq.push_back(acc / rep.n_seeds);
  }

  std::vector<double> x, y;
  for (std::size_t i = 0; i < n_ck; ++i) {
    const long n = rep.ns[i];
    if (n < n_lo || n > n_hi || n < 2) continue;
    const double mean = rep.mean_sq[i];
    if (!(mean > 0.0)) {
      rep.degenerate = true;
      rep.fit.slope = -std::numeric_limits<double>::infinity();
      return rep;
    }
    x.push_back(n + 1.0);
    y.push_back(rep.log_corrected ? mean / std::log(n + 1.0) : mean);
  }
  if (static_cast<int>(x.size()) < 20)
    throw InputError("l2_slope: fewer than 20 checkpoints in the fit window [" +
                     std::to_string(n_lo) + ", " + std::to_string(n_hi) + "]");
  rep.fit = fit_loglog(x, y);
  return rep;
}

std::pair<double, double> rate_window(double eta, double kappa,
                                      double alpha_eff) {
  if (eta < 1.0) {
    if (eta <= 0.5) return {0.0, 0.0};  // empty: the pathwise theory needs eta > 1/2
    return {0.0, 2.0 * eta - 1.0};
  }
  return {0.0, std::fmin(1.0, 2.0 * (1.0 - kappa) * alpha_eff)};
}

}  // namespace sadrift
