#include "sadrift/norms.hpp"

#include <cmath>

namespace sadrift {

namespace {

Eigen::VectorXd unit(int dim, int i) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  e(i) = 1.0;
  return e;
}

}  // namespace

Norm Norm::euclidean(int dim) {
  if (dim <= 0) throw InputError("norm: dimension must be positive");
  Norm n(NormKind::euclidean, dim);
  n.ell_ = 1.0;
  n.u_ = 1.0;
  n.ell_dir_ = unit(dim, 0);
  n.u_dir_ = unit(dim, 0);
  return n;
}

Norm Norm::max(int dim) {
  if (dim <= 0) throw InputError("norm: dimension must be positive");
  Norm n(NormKind::max, dim);
  n.ell_ = 1.0 / std::sqrt(static_cast<double>(dim));
  n.u_ = 1.0;
  n.ell_dir_ = Eigen::VectorXd::Constant(dim, n.ell_);
  n.u_dir_ = unit(dim, 0);
  return n;
}

Norm Norm::weighted_max(Eigen::VectorXd weights) {
  const int dim = static_cast<int>(weights.size());
  if (dim <= 0) throw InputError("norm: dimension must be positive");
  if (!(weights.minCoeff() > 0.0))
    throw InputError("weighted_max norm: weights must be strictly positive");
  Norm n(NormKind::weighted_max, dim);
  // min over the unit sphere of max_i |x_i|/w_i is attained at x = w/|w|_2,
  // where all ratios tie; the max is attained on the smallest-weight axis.
  n.ell_ = 1.0 / weights.norm();
  int imin;
  weights.minCoeff(&imin);
  n.u_ = 1.0 / weights(imin);
  n.ell_dir_ = weights.normalized();
  n.u_dir_ = unit(dim, imin);
  n.weights_ = std::move(weights);
  return n;
}

Norm Norm::quadratic(Eigen::MatrixXd P) {
  const int dim = static_cast<int>(P.rows());
  if (dim <= 0 || P.cols() != dim)
    throw InputError("quadratic norm: P must be square");
  const double scale = P.cwiseAbs().maxCoeff();
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (scale + 1.0))
    throw InputError("quadratic norm: P must be symmetric");
  P = ((P + P.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.info() != Eigen::Success)
    throw NumericalError("quadratic norm: eigensolver failed");
  const Eigen::VectorXd evals = es.eigenvalues();
  if (!(evals.minCoeff() > 0.0))
    throw InputError("quadratic norm: P must be positive definite");
  Norm n(NormKind::quadratic, dim);
  n.ell_ = std::sqrt(evals(0));
  n.u_ = std::sqrt(evals(dim - 1));
  n.ell_dir_ = es.eigenvectors().col(0);
  n.u_dir_ = es.eigenvectors().col(dim - 1);
  n.P_ = std::move(P);
  return n;
}

void Norm::check_dim(const Eigen::VectorXd& x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw InputError("norm: vector has dimension " +
                     std::to_string(x.size()) + ", expected " +
                     std::to_string(dim_));
}

double Norm::value(const Eigen::VectorXd& x) const {
  check_dim(x);
  switch (kind_) {
    case NormKind::euclidean:
      return x.norm();
    case NormKind::max:
      return x.lpNorm<Eigen::Infinity>();
    case NormKind::weighted_max:
      return (x.cwiseQuotient(weights_)).lpNorm<Eigen::Infinity>();
    case NormKind::quadratic: {
      const double q = x.dot(P_ * x);
      return std::sqrt(std::fmax(q, 0.0));
    }
  }
  return 0.0;  // unreachable
}

const Eigen::VectorXd& Norm::weights() const {
  if (kind_ != NormKind::weighted_max)
    throw InputError("norm: weights() requires a weighted_max norm");
  return weights_;
}

const Eigen::MatrixXd& Norm::quadratic_matrix() const {
  if (kind_ != NormKind::quadratic)
    throw InputError("norm: quadratic_matrix() requires a quadratic norm");
  return P_;
}

}  // namespace sadrift
