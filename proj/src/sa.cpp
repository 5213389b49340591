#include "sadrift/sa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>

#include "sadrift/errors.hpp"
#include "sadrift/rng.hpp"

namespace sadrift {

namespace {

// Draw streams: 0 = initial window, 1 = chain transitions.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kStepStream = 1;

struct ChainSampler {
  Eigen::MatrixXd row_cum;
  Eigen::VectorXd pi_cum;

  explicit ChainSampler(const FiniteMarkovChain& chain) {
    const Eigen::MatrixXd& P = chain.transition();
    const int n = chain.n_states();
    row_cum.resize(n, n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += P(i, j);
        row_cum(i, j) = acc;
      }
    }
    const Eigen::VectorXd& pi = chain.stationary_distribution();
    pi_cum.resize(n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += pi(j);
      pi_cum(j) = acc;
    }
  }

  int pick_row(int y, double u) const {
    const int n = static_cast<int>(row_cum.cols());
    for (int j = 0; j < n; ++j)
      if (u < row_cum(y, j)) return j;
    // fp guard: fall back to the last entry with positive mass
    for (int j = n - 1; j > 0; --j)
      if (row_cum(y, j) > row_cum(y, j - 1)) return j;
    return 0;
  }

  int pick_stationary(double u) const {
    const int n = static_cast<int>(pi_cum.size());
    for (int j = 0; j < n; ++j)
      if (u < pi_cum(j)) return j;
    return n - 1;
  }
};

Trajectory run_with_sampler(const SaModel& model, const Schedule& sched,
                            const RunOptions& opt, const Tracking& tracking,
                            const ChainSampler& sampler, std::uint64_t seed) {
  if (opt.n_steps < 0) throw InputError("run: n_steps must be nonnegative");
  const int d = model.dim();
  Eigen::VectorXd theta =
      opt.theta0.size() == 0 ? Eigen::VectorXd::Zero(d) : opt.theta0;
  if (static_cast<int>(theta.size()) != d)
    throw InputError("run: theta0 has wrong dimension");
  const Eigen::VectorXd theta_star = model.theta_star();

  Trajectory traj;
  traj.seed = seed;
  traj.n_steps = opt.n_steps;
  traj.has_v = static_cast<bool>(tracking.shifted_energy);

  int y = opt.initial_window
              ? opt.initial_window(seed)
              : sampler.pick_stationary(counter_uniform(seed, kInitStream, 0));
  if (y < 0 || y >= model.noise_chain().n_states())
    throw InputError("run: initial window index out of range");

  auto ck = opt.checkpoints.begin();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long n = 0;; ++n) {
    while (ck != opt.checkpoints.end() && *ck < n) ++ck;
    if (ck != opt.checkpoints.end() && *ck == n) {
      const Eigen::VectorXd e = theta - theta_star;
      CheckpointRecord rec;
      rec.n = n;
      rec.alpha_n = sched.rate(n);
      rec.window = y;
      rec.err_contraction = model.contraction_norm().value(e);
      rec.err_euclid = e.norm();
      rec.err_mnorm = tracking.envelope ? tracking.envelope->m_norm(e) : nan;
      rec.v_xi = traj.has_v ? tracking.shifted_energy(n, theta, y) : nan;
      traj.checkpoints.push_back(rec);
      ++ck;
    }
    if (n >= opt.dense_lo && n <= opt.dense_hi)
      traj.dense.push_back({n, theta, y});
    if (n == opt.n_steps) break;

    theta += sched.rate(n) * model.update(theta, y);
    const double norm2 = theta.norm();
    if (!(norm2 <= opt.divergence_threshold))
      throw DivergenceError(seed, n, norm2);
    y = sampler.pick_row(y, counter_uniform(seed, kStepStream,
                                            static_cast<std::uint64_t>(n)));
  }
  traj.theta_final = std::move(theta);
  return traj;
}

}  // namespace

std::vector<long> geometric_checkpoints(long n_steps, double ratio,
                                        long dense_prefix) {
  std::vector<long> out;
  for (long n = 0; n < dense_prefix && n <= n_steps; ++n) out.push_back(n);
  double v = 1.0;
  while (true) {
    const long idx = static_cast<long>(std::ceil(v));
    if (idx > n_steps) break;
    out.push_back(idx);
    v *= ratio;
  }
  out.push_back(n_steps);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Trajectory run(const SaModel& model, const Schedule& sched,
               const RunOptions& opt, const Tracking& tracking) {
  ChainSampler sampler(model.noise_chain());
  return run_with_sampler(model, sched, opt, tracking, sampler, opt.seed);
}

namespace {

std::vector<Trajectory> run_many(const SaModel& model, const Schedule& sched,
                                 const RunOptions& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const Tracking& tracking, bool parallel) {
  ChainSampler sampler(model.noise_chain());
  const int k = static_cast<int>(seeds.size());
  std::vector<Trajectory> out(k);
  std::vector<std::exception_ptr> errors(k);

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < k; ++i) {
    try {
      out[i] = run_with_sampler(model, sched, base, tracking, sampler, seeds[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (int i = 0; i < k; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  return out;
}

}  // namespace

std::vector<Trajectory> run_ensemble(const SaModel& model,
                                     const Schedule& sched,
                                     const RunOptions& base,
                                     const std::vector<std::uint64_t>& seeds,
                                     const Tracking& tracking) {
  return run_many(model, sched, base, seeds, tracking, /*parallel=*/true);
}

std::vector<Trajectory> run_ensemble_serial(
    const SaModel& model, const Schedule& sched, const RunOptions& base,
    const std::vector<std::uint64_t>& seeds, const Tracking& tracking) {
  return run_many(model, sched, base, seeds, tracking, /*parallel=*/false);
}

void write_trajectory_csv(const Trajectory& t, std::ostream& os) {
  os << (t.has_v ? "n,alpha_n,err_gtd,err_euclid,err_mnorm,V_xi\n"
                 : "n,alpha_n,err_gtd,err_euclid,err_mnorm\n");
  char buf[256];
  for (const CheckpointRecord& r : t.checkpoints) {
    if (t.has_v)
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    r.n, r.alpha_n, r.err_contraction, r.err_euclid,
                    r.err_mnorm, r.v_xi);
    else
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.n,
                    r.alpha_n, r.err_contraction, r.err_euclid, r.err_mnorm);
    os << buf;
  }
}

}  // namespace sadrift
