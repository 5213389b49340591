// Benchmark: OpenMP kernels against their serial reference implementations.
#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sadrift/drift.hpp"
#include "sadrift/gtd.hpp"
#include "sadrift/moreau.hpp"
#include "sadrift/sa.hpp"

using namespace sadrift;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main() {
  const FiniteMDP mdp = random_mdp(424242, 3, 2, 0.8);
  PolicyPair pol;
  pol.behavior = random_policy(4243, 3, 2);
  pol.target = random_policy(4244, 3, 2);
  GtdModel model = GtdModel::build(mdp, pol, FactorSpec::retrace(0.9));
  const double xi = choose_xi(model.kappa(), model.contraction_norm(), 0.5);
  MoreauEnvelope env(model.contraction_norm(), xi);
  const Schedule sched(model.alpha_effective(0.5), 0.8);
  const DriftConstants constants = compute_constants(model, env, sched);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif

  {
    RunOptions opt;
    opt.n_steps = 200000;
    opt.checkpoints = geometric_checkpoints(opt.n_steps);
    std::vector<std::uint64_t> seeds(32);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;

    run_ensemble_serial(model, sched, opt, {0, 1});  // warm caches
    auto t0 = Clock::now();
    const auto serial = run_ensemble_serial(model, sched, opt, seeds);
    const double t_serial = seconds_since(t0);
    t0 = Clock::now();
    const auto parallel = run_ensemble(model, sched, opt, seeds);
    const double t_parallel = seconds_since(t0);
    double diff = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i)
      diff += (serial[i].theta_final - parallel[i].theta_final)
                  .cwiseAbs()
                  .maxCoeff();
    std::printf(
        "ensemble (32 seeds x 2e5 steps): serial %.3fs, parallel %.3fs, "
        "speedup %.2fx, max diff %g\n",
        t_serial, t_parallel, t_serial / t_parallel, diff);
  }

  {
    const long window = 20000;
    RunOptions opt;
    opt.n_steps = constants.N_tail + window;
    opt.seed = 1;
    opt.dense_lo = constants.N_tail;
    opt.dense_hi = opt.n_steps;
    const Trajectory traj = run(model, sched, opt);

    certify_drift_serial(traj, model, env, constants, sched, 100);  // warm
    auto t0 = Clock::now();
    const DriftCertificate serial = certify_drift_serial(
        traj, model, env, constants, sched, window);
    const double t_serial = seconds_since(t0);
    t0 = Clock::now();
    const DriftCertificate parallel =
        certify_drift(traj, model, env, constants, sched, window);
    const double t_parallel = seconds_since(t0);
    std::printf(
        "certification (2e4 steps): serial %.3fs, parallel %.3fs, "
        "speedup %.2fx, slack diff %g\n",
        t_serial, t_parallel, t_serial / t_parallel,
        std::abs(serial.min_slack - parallel.min_slack));
  }
  return 0;
}
