#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sadrift/drift.hpp"
#include "sadrift/markov.hpp"
#include "sadrift/norms.hpp"

namespace sadrift {

struct FiniteMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Eigen::MatrixXd> transition;  // transition[a](s, s') = p(s'|s,a)
  Eigen::MatrixXd reward;                   // reward(s, a)
  double gamma = 0.9;

  double r_max() const { return reward.cwiseAbs().maxCoeff(); }
  void validate() const;
};

struct PolicyPair {
  Eigen::MatrixXd target;    // target(s, a)
  Eigen::MatrixXd behavior;  // behavior(s, a) > 0 everywhere (strict coverage)
  void validate(int n_states, int n_actions) const;
};

enum class FactorPreset {
  on_policy,
  off_policy,
  q_trace,
  retrace,
  tree_backup,
  q_pi,
  custom
};

// Per-step importance factors c, rho over state-action pairs. Presets expand
// against the policy ratio ratio(s,a) = target(a|s)/behavior(a|s):
//   on_policy     c = 1                   rho = 1
//   off_policy    c = ratio               rho = ratio
//   q_trace       c = min(c_bar, ratio)   rho = min(rho_bar, ratio)
//   retrace       c = l min(1, ratio)     rho = ratio
//   tree_backup   c = l target(a|s)       rho = ratio
//   q_pi          c = l                   rho = ratio
struct FactorSpec {
  FactorPreset preset = FactorPreset::on_policy;
  double lambda = 1.0;
  double c_bar = 1.0, rho_bar = 1.0;
  Eigen::MatrixXd c_table, rho_table;  // custom only

  static FactorSpec on_policy();
  static FactorSpec off_policy();
  static FactorSpec q_trace(double c_bar, double rho_bar);
  static FactorSpec retrace(double lambda);
  static FactorSpec tree_backup(double lambda);
  static FactorSpec q_pi(double lambda);
  static FactorSpec custom(Eigen::MatrixXd c, Eigen::MatrixXd rho);

  std::string name() const;
  // (c, rho) tables over (s, a)
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> expand(
      const PolicyPair& policies) const;
};

// Behavior state-action chain (s,a) -> (s',a') with
// p(s'|s,a) behavior(a'|s'); states indexed s * n_actions + a.
FiniteMarkovChain behavior_sa_chain(const FiniteMDP& mdp,
                                    const PolicyPair& policies);

// Exhaustive enumeration of length-(N+1) state-action windows with positive
// path probability, and the shift chain over them (restricted to its closed
// class). windows[i] lists the N+1 state-action indices of window i.
struct WindowChain {
  FiniteMarkovChain chain;
  std::vector<std::vector<int>> windows;
};
WindowChain build_window_chain(const FiniteMDP& mdp, const PolicyPair& policies,
                               int N, int max_windows = 20000);

struct GtdOptions {
  int horizon = 1;               // N >= 1
  Eigen::MatrixXd features;      // d x (S A); empty -> tabular basis
  int max_windows = 20000;
  int beta_grid_points = 32;
  double beta_grid_lo = 1e-3;
};

// The compiled generalized TD model. As a stochastic approximation:
//   F(w, y) = beta (A(y) w - b(y)),  alpha_n = a_n / beta,
// contractive in the quadratic Lyapunov norm with factor kappa < 1.
class GtdModel final : public DriftModel {
 public:
  static GtdModel build(FiniteMDP mdp, PolicyPair policies, FactorSpec factors,
                        GtdOptions opts = {});

  // SA / drift interface
  int dim() const override { return dim_; }
  const FiniteMarkovChain& noise_chain() const override { return window_chain_; }
  Eigen::VectorXd update(const Eigen::VectorXd& w, int y) const override {
    return beta_ * (A_[y] * w - b_[y]);
  }
  void update_into(const Eigen::VectorXd& w, int y,
                   Eigen::VectorXd& out) const override {
    out.noalias() = A_[y] * w;
    out -= b_[y];
    out *= beta_;
  }
  Eigen::VectorXd theta_star() const override { return w_star_; }
  const Norm& contraction_norm() const override { return norm_; }
  Eigen::VectorXd poisson_eval(const Eigen::VectorXd& w, int y) const override {
    return poisson_.eval(w, y);
  }
  Eigen::VectorXd poisson_predicted(const Eigen::VectorXd& w,
                                    int y) const override {
    return poisson_.eval_predicted(w, y);
  }
  double kappa() const override { return kappa_; }
  double lip_F() const override { return lip_F_; }
  double lip_H() const override { return lip_H_; }

  // model pieces
  const FiniteMDP& mdp() const { return mdp_; }
  const PolicyPair& policies() const { return policies_; }
  const FiniteMarkovChain& behavior_chain() const { return behavior_chain_; }
  const std::vector<std::vector<int>>& windows() const { return windows_; }
  int n_windows() const { return static_cast<int>(windows_.size()); }
  int horizon() const { return horizon_; }
  int sa_index(int s, int a) const { return s * mdp_.n_actions + a; }
  const Eigen::MatrixXd& factor_c() const { return c_; }
  const Eigen::MatrixXd& factor_rho() const { return rho_; }
  const Eigen::MatrixXd& features() const { return features_; }

  // g_{c,rho}(w, y), evaluated from the window's temporal differences
  Eigen::VectorXd td_increment(const Eigen::VectorXd& w, int y) const;

  const Eigen::MatrixXd& A(int y) const { return A_[y]; }
  const Eigen::VectorXd& b(int y) const { return b_[y]; }
  const Eigen::MatrixXd& A_bar() const { return A_bar_; }
  const Eigen::VectorXd& b_bar() const { return b_bar_; }
  const Eigen::VectorXd& w_star() const { return w_star_; }

  double beta() const { return beta_; }
  const Eigen::MatrixXd& P_gtd() const { return P_gtd_; }
  const AffinePoissonSolution& poisson() const { return poisson_; }

  // a_n / beta, the effective SA learning-rate constant
  double alpha_effective(double a) const { return a / beta_; }

  // Per-seed initial window: start the behavior chain at state s0, discard
  // the first N steps while the window fills.
  int initial_window_from_state(int s0, std::uint64_t seed) const;

 private:
  GtdModel(FiniteMarkovChain window_chain, FiniteMarkovChain behavior_chain,
           Norm norm)
      : window_chain_(std::move(window_chain)),
        behavior_chain_(std::move(behavior_chain)),
        norm_(std::move(norm)) {}

  FiniteMDP mdp_;
  PolicyPair policies_;
  Eigen::MatrixXd c_, rho_;
  int horizon_ = 1;
  int dim_ = 0;
  Eigen::MatrixXd features_;
  FiniteMarkovChain window_chain_;
  FiniteMarkovChain behavior_chain_;
  std::vector<std::vector<int>> windows_;
  std::vector<Eigen::MatrixXd> A_;
  std::vector<Eigen::VectorXd> b_;
  Eigen::MatrixXd A_bar_;
  Eigen::VectorXd b_bar_;
  Eigen::VectorXd w_star_;
  double beta_ = 0;
  Eigen::MatrixXd P_gtd_;
  double kappa_ = 0;
  Norm norm_;
  AffinePoissonSolution poisson_;
  double lip_F_ = 0;
  double lip_H_ = 0;
};

// Dirichlet(1,...,1) transition rows and uniform rewards in [-1, 1].
FiniteMDP random_mdp(std::uint64_t seed, int n_states, int n_actions,
                     double gamma);
// Dirichlet(1,...,1) rows; strictly positive almost surely.
Eigen::MatrixXd random_policy(std::uint64_t seed, int n_states, int n_actions);

}  // namespace sadrift
