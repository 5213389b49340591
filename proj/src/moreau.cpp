#include "sadrift/moreau.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sadrift {

MoreauEnvelope::MoreauEnvelope(Norm base, double xi)
    : base_(std::move(base)), xi_(xi) {
  if (!(xi > 0.0)) throw InputError("moreau: xi must be positive");
  const auto [ell, u] = base_.equivalence_constants();
  ell_xi_ = std::sqrt(1.0 + xi_ * ell * ell);
  u_xi_ = std::sqrt(1.0 + xi_ * u * u);
  if (base_.kind() == NormKind::quadratic) {
    const int d = base_.dim();
    Eigen::MatrixXd shifted =
        xi_ * base_.quadratic_matrix() + Eigen::MatrixXd::Identity(d, d);
    shifted_quad_.compute(shifted);
    if (shifted_quad_.info() != Eigen::Success)
      throw NumericalError("moreau: factorization of xi P + I failed");
  }
}

Eigen::VectorXd MoreauEnvelope::prox_point(const Eigen::VectorXd& x) const {
  switch (base_.kind()) {
    case NormKind::euclidean:
      return x / (1.0 + xi_);
    case NormKind::quadratic:
      return shifted_quad_.solve(x);
    case NormKind::max:
    case NormKind::weighted_max:
      break;
  }

  // Reduced problem in s = |u| (base norm): for fixed s the closest feasible
  // u clamps each coordinate to [-s w_i, s w_i], leaving
  //   g(s) = 0.5 s^2 + (1/2xi) sum_i (|x_i| - s w_i)_+^2,
  // a convex piecewise quadratic whose breakpoints are b_i = |x_i|/w_i.
  // Scan segments from the largest breakpoint down; the stationary point of
  // the active segment is s = sum_A w_i |x_i| / (xi + sum_A w_i^2).
  const int d = base_.dim();
  if (static_cast<int>(x.size()) != d)
    throw InputError("moreau: dimension mismatch");
  const bool weighted = base_.kind() == NormKind::weighted_max;

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  const auto weight = [&](int i) { return weighted ? base_.weights()(i) : 1.0; };
  const auto breakpoint = [&](int i) { return std::abs(x(i)) / weight(i); };
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return breakpoint(a) > breakpoint(b); });

  double s = 0.0;
  double sum_wx = 0.0;
  double sum_w2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const int i = order[k];
    sum_wx += weight(i) * std::abs(x(i));
    sum_w2 += weight(i) * weight(i);
    const double lo = (k + 1 < d) ? breakpoint(order[k + 1]) : 0.0;
    const double hi = breakpoint(i);
    const double cand = sum_wx / (xi_ + sum_w2);
    if (cand >= lo) {
      s = std::min(cand, hi);
      break;
    }
  }

  Eigen::VectorXd u(d);
  for (int i = 0; i < d; ++i) {
    const double cap = s * weight(i);
    u(i) = std::clamp(x(i), -cap, cap);
  }
  return u;
}

double MoreauEnvelope::envelope(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd u = prox_point(x);
  const double base_val = base_.value(u);
  return 0.5 * base_val * base_val +
         (x - u).squaredNorm() / (2.0 * xi_);
}

Eigen::VectorXd MoreauEnvelope::gradient(const Eigen::VectorXd& x) const {
  return (x - prox_point(x)) / xi_;
}

double MoreauEnvelope::m_norm(const Eigen::VectorXd& x) const {
  return std::sqrt(2.0 * envelope(x));
}

double mu_xi(double kappa, const MoreauEnvelope& env) {
  const double ratio = kappa * env.u_xi() / env.ell_xi();
  if (!(ratio < 1.0))
    throw ConfigError(
        "mu_xi: inadmissible xi, kappa u_xi/ell_xi = " + std::to_string(ratio));
  return 2.0 * (1.0 - ratio);
}

double choose_xi(double kappa, const Norm& norm, double margin,
                 double default_xi) {
  if (!(kappa > 0.0 && kappa < 1.0))
    throw InputError("choose_xi: kappa must lie in (0, 1)");
  if (!(margin > 0.0 && margin < 1.0))
    throw InputError("choose_xi: margin must lie in (0, 1)");
  const auto [ell, u] = norm.equivalence_constants();
  if (u <= ell * (1.0 + 1e-14)) return default_xi;  // ratio is 1 for every xi

  const double threshold = 1.0 - margin * (1.0 - kappa);
  const double step = std::pow(2.0, 0.25);
  double xi = std::pow(2.0, 16);
  for (int k = 0; k < 512; ++k, xi /= step) {
    const double ratio = kappa * std::sqrt((1.0 + xi * u * u) /
                                           (1.0 + xi * ell * ell));
    if (ratio <= threshold) return xi;
  }
  // Unreachable for margin < 1: the ratio tends to kappa < threshold.
  throw ConfigError("choose_xi: no admissible xi found on the search grid");
}

}  // namespace sadrift
