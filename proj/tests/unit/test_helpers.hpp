#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "sadrift/drift.hpp"
#include "sadrift/gtd.hpp"
#include "sadrift/markov.hpp"
#include "sadrift/moreau.hpp"
#include "sadrift/norms.hpp"
#include "sadrift/rng.hpp"

namespace sadrift::testing {

inline Eigen::VectorXd random_vector(CounterRng& rng, int d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
  return v;
}

// ---- envelope oracles -----------------------------------------------------

// Brute-force minimization of the envelope objective over a 2-d grid, with
// iterative refinement around the argmin.
struct GridMinimum {
  double envelope;
  Eigen::Vector2d prox;
};

inline GridMinimum grid_envelope_2d(const Norm& norm, double xi,
                                    const Eigen::Vector2d& x, double lo = -2.0,
                                    double hi = 2.0, double step = 1e-3,
                                    int refinements = 2) {
  const auto objective = [&](const Eigen::Vector2d& u) {
    const double nv = norm.value(u);
    return 0.5 * nv * nv + (x - u).squaredNorm() / (2.0 * xi);
  };
  double lo0 = lo, hi0 = hi, lo1 = lo, hi1 = hi, h = step;
  Eigen::Vector2d best(0, 0);
  double best_val = objective(best);
  for (int round = 0; round <= refinements; ++round) {
    const int n0 = static_cast<int>(std::floor((hi0 - lo0) / h)) + 1;
    const int n1 = static_cast<int>(std::floor((hi1 - lo1) / h)) + 1;
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j) {
        const Eigen::Vector2d u(lo0 + i * h, lo1 + j * h);
        const double val = objective(u);
        if (val < best_val) {
          best_val = val;
          best = u;
        }
      }
    // keep the window generous: high curvature can push the coarse argmin
    // several cells off the true minimizer
    lo0 = best(0) - 6.0 * h;
    hi0 = best(0) + 6.0 * h;
    lo1 = best(1) - 6.0 * h;
    hi1 = best(1) + 6.0 * h;
    h /= 10.0;
  }
  return {best_val, best};
}

inline Eigen::VectorXd finite_difference_gradient(const MoreauEnvelope& env,
                                                  const Eigen::VectorXd& x,
                                                  double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (env.envelope(xp) - env.envelope(xm)) / (2.0 * h);
  }
  return g;
}

// Non-smooth points of the base norm make numerical differentiation noisy;
// near-tied leading coordinates are the kinks of the max families.
inline bool near_norm_kink(const Norm& norm, const Eigen::VectorXd& x,
                           double tol = 1e-4) {
  if (norm.kind() == NormKind::euclidean || norm.kind() == NormKind::quadratic)
    return x.norm() < tol;
  Eigen::VectorXd scaled = x.cwiseAbs();
  if (norm.kind() == NormKind::weighted_max)
    scaled = scaled.cwiseQuotient(norm.weights());
  double top = -1.0, second = -1.0;
  for (int i = 0; i < scaled.size(); ++i) {
    if (scaled(i) > top) {
      second = top;
      top = scaled(i);
    } else if (scaled(i) > second) {
      second = scaled(i);
    }
  }
  return top < tol || top - second < tol;
}

// ---- chain oracles ----------------------------------------------------------

inline Eigen::MatrixXd random_stochastic_matrix(CounterRng& rng, int n) {
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row(n);
    for (int j = 0; j < n; ++j) row(j) = rng.exponential();
    P.row(i) = (row / row.sum()).transpose();
  }
  return P;
}

inline Eigen::VectorXd stationary_power_iteration(const Eigen::MatrixXd& P,
                                                  double tol = 1e-13,
                                                  int max_iters = 1000000) {
  const int n = static_cast<int>(P.rows());
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int k = 0; k < max_iters; ++k) {
    Eigen::VectorXd next = (pi.transpose() * P).transpose();
    next /= next.sum();
    if ((next - pi).cwiseAbs().maxCoeff() < tol) return next;
    pi = next;
  }
  return pi;
}

// Truncated series solution h = sum_{t<=terms} P^t (g - 1 pi' g).
inline Eigen::MatrixXd poisson_neumann(const Eigen::MatrixXd& P,
                                       const Eigen::VectorXd& pi,
                                       const Eigen::MatrixXd& g,
                                       int terms = 200) {
  const Eigen::MatrixXd centered =
      g - Eigen::VectorXd::Ones(g.rows()) * (pi.transpose() * g);
  Eigen::MatrixXd h = centered;
  Eigen::MatrixXd term = centered;
  for (int t = 1; t <= terms; ++t) {
    term = P * term;
    h += term;
  }
  return h;
}

// ---- matrices ---------------------------------------------------------------

// Symmetric part forced negative definite, so the result is Hurwitz.
inline Eigen::MatrixXd random_hurwitz(CounterRng& rng, int d) {
  Eigen::MatrixXd M(d, d), S(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      M(i, j) = rng.normal();
      S(i, j) = rng.normal();
    }
  return 0.5 * (S - S.transpose()) - M * M.transpose() -
         0.1 * Eigen::MatrixXd::Identity(d, d);
}

// Dense angular sweep over unit-P-norm vectors in 2-d.
inline double opnorm_sphere_2d(const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& P, int samples = 10000) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  const Eigen::MatrixXd Lt = llt.matrixL().transpose();
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double phi = 3.14159265358979323846 * k / samples;
    Eigen::Vector2d z(std::cos(phi), std::sin(phi));
    const Eigen::VectorXd x = Lt.triangularView<Eigen::Upper>().solve(z);
    const Eigen::VectorXd y = B * x;
    best = std::fmax(best, std::sqrt(y.dot(P * y)));
  }
  return best;
}

// ---- MDP oracle -------------------------------------------------------------

// Policy evaluation by value iteration:
// Q(s,a) = r(s,a) + gamma sum_s' p(s'|s,a) sum_a' pi(a'|s') Q(s',a').
inline Eigen::VectorXd policy_q_value(const FiniteMDP& mdp,
                                      const Eigen::MatrixXd& pi,
                                      double tol = 1e-12) {
  const int S = mdp.n_states, A = mdp.n_actions;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(S * A);
  for (int iter = 0; iter < 1000000; ++iter) {
    Eigen::VectorXd next(S * A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double exp_next = 0.0;
        for (int sp = 0; sp < S; ++sp) {
          double inner = 0.0;
          for (int ap = 0; ap < A; ++ap) inner += pi(sp, ap) * q(sp * A + ap);
          exp_next += mdp.transition[a](s, sp) * inner;
        }
        next(s * A + a) = mdp.reward(s, a) + mdp.gamma * exp_next;
      }
    if ((next - q).cwiseAbs().maxCoeff() < tol) return next;
    q = next;
  }
  return q;
}

// ---- synthetic nonlinear drift model ---------------------------------------
//
// F(theta, y) = kappa sin(theta) - theta + m(y) with pi-centered additive
// noise m. The mean map T(theta) = kappa sin(theta) is a kappa-contraction in
// the max norm with fixed point 0, and the Poisson solution is
// H_theta(y) = h(y) with h - Ph = m.
class AdditiveNoiseModel final : public DriftModel {
 public:
  AdditiveNoiseModel(FiniteMarkovChain chain, std::vector<Eigen::VectorXd> m_raw,
                     double kappa)
      : chain_(std::move(chain)),
        kappa_(kappa),
        dim_(static_cast<int>(m_raw.at(0).size())),
        norm_(Norm::max(dim_)) {
    const Eigen::VectorXd& pi = chain_.stationary_distribution();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim_);
    for (int y = 0; y < chain_.n_states(); ++y) mean += pi(y) * m_raw[y];
    Eigen::MatrixXd g(chain_.n_states(), dim_);
    m_.resize(m_raw.size());
    for (int y = 0; y < chain_.n_states(); ++y) {
      m_[y] = m_raw[y] - mean;
      g.row(y) = m_[y].transpose();
    }
    const Eigen::MatrixXd h = chain_.poisson_solve(g);
    const Eigen::MatrixXd ph = chain_.transition() * h;
    h_.resize(chain_.n_states());
    ph_.resize(chain_.n_states());
    double max_m = 0.0, max_h = 0.0;
    for (int y = 0; y < chain_.n_states(); ++y) {
      h_[y] = h.row(y).transpose();
      ph_[y] = ph.row(y).transpose();
      max_m = std::fmax(max_m, m_[y].lpNorm<Eigen::Infinity>());
      max_h = std::fmax(max_h, h_[y].lpNorm<Eigen::Infinity>());
    }
    lip_F_ = std::fmax(1.0 + kappa_, max_m);
    lip_H_ = max_h;
  }

  int dim() const override { return dim_; }
  const FiniteMarkovChain& noise_chain() const override { return chain_; }
  Eigen::VectorXd update(const Eigen::VectorXd& theta, int y) const override {
    return kappa_ * theta.array().sin().matrix() - theta + m_[y];
  }
  Eigen::VectorXd theta_star() const override {
    return Eigen::VectorXd::Zero(dim_);
  }
  const Norm& contraction_norm() const override { return norm_; }
  Eigen::VectorXd poisson_eval(const Eigen::VectorXd&, int y) const override {
    return h_[y];
  }
  Eigen::VectorXd poisson_predicted(const Eigen::VectorXd&,
                                    int y) const override {
    return ph_[y];
  }
  double kappa() const override { return kappa_; }
  double lip_F() const override { return lip_F_; }
  double lip_H() const override { return lip_H_; }

  const Eigen::VectorXd& noise(int y) const { return m_[y]; }

 private:
  FiniteMarkovChain chain_;
  double kappa_;
  int dim_;
  Norm norm_;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> h_;
  std::vector<Eigen::VectorXd> ph_;
  double lip_F_;
  double lip_H_;
};

inline AdditiveNoiseModel make_additive_model(std::uint64_t seed, int n_states,
                                              int dim, double kappa,
                                              double noise_scale = 1.0) {
  CounterRng rng(seed, /*stream=*/21);
  FiniteMarkovChain chain({}, random_stochastic_matrix(rng, n_states));
  std::vector<Eigen::VectorXd> m(n_states);
  for (int y = 0; y < n_states; ++y)
    m[y] = random_vector(rng, dim, noise_scale);
  return AdditiveNoiseModel(std::move(chain), std::move(m), kappa);
}

// A fixed 3-state / 2-action MDP used across certification tests: random
// draw from the library generator under a frozen seed.
inline FiniteMDP desk_mdp() { return random_mdp(424242, 3, 2, 0.8); }

}  // namespace sadrift::testing
