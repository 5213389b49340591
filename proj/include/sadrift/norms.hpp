#pragma once

#include <Eigen/Dense>
#include <utility>

#include "sadrift/errors.hpp"

namespace sadrift {

enum class NormKind { euclidean, max, weighted_max, quadratic };

// A norm on R^d together with its tight Euclidean-equivalence constants
// (ell, u):  ell * |x|_2 <= |x| <= u * |x|_2 for all x.
//
// Supported families:
//   euclidean      |x| = |x|_2
//   max            |x| = max_i |x_i|
//   weighted_max   |x| = max_i |x_i| / w_i, w_i > 0
//   quadratic      |x| = sqrt(x' P x), P symmetric positive definite
class Norm {
 public:
  static Norm euclidean(int dim);
  static Norm max(int dim);
  static Norm weighted_max(Eigen::VectorXd weights);
  static Norm quadratic(Eigen::MatrixXd P);

  double value(const Eigen::VectorXd& x) const;

  // Tight (ell, u): the min and max of |x| over the unit Euclidean sphere.
  std::pair<double, double> equivalence_constants() const { return {ell_, u_}; }

  NormKind kind() const { return kind_; }
  int dim() const { return dim_; }

  const Eigen::VectorXd& weights() const;
  const Eigen::MatrixXd& quadratic_matrix() const;

  // Unit-Euclidean directions attaining ell and u (sharpness witnesses).
  const Eigen::VectorXd& ell_direction() const { return ell_dir_; }
  const Eigen::VectorXd& u_direction() const { return u_dir_; }

 private:
  Norm(NormKind kind, int dim) : kind_(kind), dim_(dim) {}
  void check_dim(const Eigen::VectorXd& x) const;

  NormKind kind_;
  int dim_;
  Eigen::VectorXd weights_;  // weighted_max
  Eigen::MatrixXd P_;        // quadratic
  double ell_ = 1.0;
  double u_ = 1.0;
  Eigen::VectorXd ell_dir_;
  Eigen::VectorXd u_dir_;
};

}  // namespace sadrift
