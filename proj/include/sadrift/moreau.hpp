#pragma once

#include <Eigen/Dense>

#include "sadrift/norms.hpp"

namespace sadrift {

// Moreau envelope of x -> 0.5 |x|^2 (base norm) with Euclidean penalty:
//
//   M_xi(x) = inf_u { 0.5 |u|^2 + (1/2xi) |x - u|_2^2 }.
//
// M_xi is C^1 and (1/xi)-smooth, equals 0.5 |x|_{m,xi}^2 for a norm
// |.|_{m,xi}, and satisfies
//
//   ell_xi |x|_{m,xi} <= |x| <= u_xi |x|_{m,xi},
//   ell_xi = sqrt(1 + xi ell^2),  u_xi = sqrt(1 + xi u^2).
//
// The proximal point (the minimizer u*) is computed exactly for every
// supported norm family: closed forms for the Euclidean and quadratic
// kinds, and sorted-breakpoint minimization of the piecewise-quadratic
// reduced objective for the max kinds.
class MoreauEnvelope {
 public:
  MoreauEnvelope(Norm base, double xi);

  Eigen::VectorXd prox_point(const Eigen::VectorXd& x) const;
  double envelope(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;  // (x - u*)/xi
  double m_norm(const Eigen::VectorXd& x) const;             // sqrt(2 M_xi(x))

  const Norm& base() const { return base_; }
  double xi() const { return xi_; }
  double ell_xi() const { return ell_xi_; }
  double u_xi() const { return u_xi_; }

 private:
  Norm base_;
  double xi_;
  double ell_xi_;
  double u_xi_;
  Eigen::LLT<Eigen::MatrixXd> shifted_quad_;  // xi P + I, quadratic kind only
};

// Smoothing drift rate mu_xi = 2 (1 - kappa u_xi/ell_xi); requires the
// smoothing to preserve the contraction, kappa u_xi/ell_xi < 1.
double mu_xi(double kappa, const MoreauEnvelope& env);

// Largest xi on a geometric grid with
//   kappa u_xi/ell_xi <= 1 - margin (1 - kappa).
// When ell == u every xi is admissible and default_xi is returned.
double choose_xi(double kappa, const Norm& norm, double margin,
                 double default_xi = 1.0);

}  // namespace sadrift
