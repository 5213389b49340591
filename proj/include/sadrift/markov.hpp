#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "sadrift/errors.hpp"

namespace sadrift {

// Finite Markov chain over an enumerated state set. Immutable after
// construction; the class structure, stationary distribution and the
// fundamental-matrix factorization are computed once on first use and
// shared across copies.
class FiniteMarkovChain {
 public:
  FiniteMarkovChain(std::vector<std::string> states, Eigen::MatrixXd P);

  int n_states() const { return static_cast<int>(P_.rows()); }
  const std::vector<std::string>& states() const { return states_; }
  const Eigen::MatrixXd& transition() const { return P_; }

  // Communicating-class structure of the positive-transition graph.
  int n_closed_classes() const;
  bool irreducible() const;  // one class covering every state
  bool aperiodic_on_recurrent() const;
  // Sorted state indices of the unique closed class; StructureError when the
  // chain has several closed classes.
  const std::vector<int>& recurrent_class() const;
  FiniteMarkovChain restricted_to_recurrent() const;

  // pi with pi P = pi, sum pi = 1; supported on the unique closed class.
  const Eigen::VectorXd& stationary_distribution() const;

  // Solves h - P h = g - pi(g) columnwise via the fundamental matrix
  // Z = (I - P + 1 pi')^{-1}; the solution satisfies pi(h) = 0. Requires a
  // unique closed class that is aperiodic.
  Eigen::MatrixXd poisson_solve(const Eigen::MatrixXd& g) const;

 private:
  struct Analysis;
  const Analysis& analysis() const;
  void require_ergodic(const char* op) const;

  std::vector<std::string> states_;
  Eigen::MatrixXd P_;
  std::shared_ptr<Analysis> cache_;
};

// Poisson solution for per-state affine updates F(theta, y) = A(y) theta - b(y):
// H_theta(y) = G(y) theta - h(y) with pi-mean-zero G and h, satisfying
// H_theta - P H_theta = F(theta, .) - f(theta) for every theta.
struct AffinePoissonSolution {
  std::vector<Eigen::MatrixXd> G;
  std::vector<Eigen::VectorXd> h;
  // One-step predictions (P G)(y) = sum_y' P(y,y') G(y'), likewise Ph.
  std::vector<Eigen::MatrixXd> PG;
  std::vector<Eigen::VectorXd> Ph;

  Eigen::VectorXd eval(const Eigen::VectorXd& theta, int y) const {
    return G[y] * theta - h[y];
  }
  Eigen::VectorXd eval_predicted(const Eigen::VectorXd& theta, int y) const {
    return PG[y] * theta - Ph[y];
  }
};

AffinePoissonSolution affine_poisson(const FiniteMarkovChain& chain,
                                     const std::vector<Eigen::MatrixXd>& A,
                                     const std::vector<Eigen::VectorXd>& b);

struct HurwitzCheck {
  bool hurwitz;
  double abscissa;  // max real part of the spectrum
};
HurwitzCheck is_hurwitz(const Eigen::MatrixXd& A);

// Solves A' P + P A = -I for symmetric positive definite P (A Hurwitz).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A);

// Operator norm of B acting on (R^d, |.|_P), P symmetric positive definite.
double p_norm_operator_norm(const Eigen::MatrixXd& B, const Eigen::MatrixXd& P);

struct ContractionSetup {
  double beta;
  Eigen::MatrixXd P;
  double kappa;
};

// Lyapunov reduction for a Hurwitz mean matrix: picks the beta on the grid
// minimizing kappa(beta) = |I + beta A|_P and requires kappa < 1.
ContractionSetup contraction_setup(const Eigen::MatrixXd& A_bar,
                                   const std::vector<double>& beta_grid);
std::vector<double> default_beta_grid(const Eigen::MatrixXd& A_bar,
                                      int points = 32, double lo = 1e-3);

}  // namespace sadrift
