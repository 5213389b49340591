#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sadrift/markov.hpp"
#include "sadrift/moreau.hpp"
#include "sadrift/norms.hpp"
#include "sadrift/schedule.hpp"

namespace sadrift {

// What the recursion engine drives:
//   theta_{n+1} = theta_n + alpha_n F(theta_n, Y_n)
// with Y_n stepping through the model's noise chain.
class SaModel {
 public:
  virtual ~SaModel() = default;
  virtual int dim() const = 0;
  virtual const FiniteMarkovChain& noise_chain() const = 0;
  virtual Eigen::VectorXd update(const Eigen::VectorXd& theta, int y) const = 0;
  // allocation-free variant for the hot loop
  virtual void update_into(const Eigen::VectorXd& theta, int y,
                           Eigen::VectorXd& out) const {
    out = update(theta, y);
  }
  virtual Eigen::VectorXd theta_star() const = 0;
  virtual const Norm& contraction_norm() const = 0;
};

struct CheckpointRecord {
  long n = 0;
  double alpha_n = 0;
  int window = 0;
  double err_contraction = 0;  // |theta_n - theta*| in the contraction norm
  double err_euclid = 0;
  double err_mnorm = 0;  // NaN when no envelope is tracked
  double v_xi = 0;       // NaN when no energy evaluator is tracked
};

struct DenseRecord {
  long n = 0;
  Eigen::VectorXd theta;
  int window = 0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  long n_steps = 0;
  bool has_v = false;
  std::vector<CheckpointRecord> checkpoints;
  std::vector<DenseRecord> dense;  // consecutive steps over [dense_lo, dense_hi]
  Eigen::VectorXd theta_final;
};

struct RunOptions {
  long n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<long> checkpoints;  // sorted ascending, deduplicated
  long dense_lo = 0, dense_hi = -1;  // inclusive record range; empty if lo > hi
  Eigen::VectorXd theta0;            // empty -> zero vector
  // Y_0 is drawn from the stationary law unless a chooser is given.
  std::function<int(std::uint64_t seed)> initial_window;
  double divergence_threshold = 1e12;
};

// Optional per-checkpoint extras.
struct Tracking {
  const MoreauEnvelope* envelope = nullptr;
  std::function<double(long n, const Eigen::VectorXd& theta, int y)>
      shifted_energy;
};

// Dense prefix {0..dense_prefix-1} plus the geometric grid ceil(ratio^k),
// plus n_steps itself.
std::vector<long> geometric_checkpoints(long n_steps, double ratio = 1.1,
                                        long dense_prefix = 100);

Trajectory run(const SaModel& model, const Schedule& sched,
               const RunOptions& opt, const Tracking& tracking = {});

// One independent run per seed, results in seed order. The parallel kernel
// and the serial reference produce bit-identical trajectories (all draws are
// counter-based).
std::vector<Trajectory> run_ensemble(const SaModel& model,
                                     const Schedule& sched,
                                     const RunOptions& base,
                                     const std::vector<std::uint64_t>& seeds,
                                     const Tracking& tracking = {});
std::vector<Trajectory> run_ensemble_serial(
    const SaModel& model, const Schedule& sched, const RunOptions& base,
    const std::vector<std::uint64_t>& seeds, const Tracking& tracking = {});

// CSV schema: n,alpha_n,err_gtd,err_euclid,err_mnorm[,V_xi]
void write_trajectory_csv(const Trajectory& t, std::ostream& os);

}  // namespace sadrift
