#include "sadrift/gtd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sadrift/rng.hpp"

namespace sadrift {

namespace {

constexpr double kStochasticTol = 1e-12;

std::string sa_label(int sa, int n_actions) {
  return std::to_string(sa / n_actions) + "." + std::to_string(sa % n_actions);
}

}  // namespace

void FiniteMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw InputError("mdp: state and action counts must be positive");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw InputError("mdp: gamma must lie in (0, 1)");
  if (static_cast<int>(transition.size()) != n_actions)
    throw InputError("mdp: one transition matrix per action required");
  for (int a = 0; a < n_actions; ++a) {
    const Eigen::MatrixXd& T = transition[a];
    if (T.rows() != n_states || T.cols() != n_states)
      throw InputError("mdp: transition matrix shape mismatch");
    for (int s = 0; s < n_states; ++s) {
      if (T.row(s).minCoeff() < 0.0)
        throw InputError("mdp: negative transition probability");
      if (std::abs(T.row(s).sum() - 1.0) > kStochasticTol)
        throw InputError("mdp: transition row does not sum to 1");
    }
  }
  if (reward.rows() != n_states || reward.cols() != n_actions)
    throw InputError("mdp: reward shape mismatch");
  if (!reward.allFinite()) throw InputError("mdp: rewards must be finite");
}

void PolicyPair::validate(int n_states, int n_actions) const {
  const auto check_rows = [&](const Eigen::MatrixXd& p, const char* which) {
    if (p.rows() != n_states || p.cols() != n_actions)
      throw InputError(std::string("policies: ") + which + " shape mismatch");
    for (int s = 0; s < n_states; ++s) {
      if (p.row(s).minCoeff() < 0.0)
        throw InputError(std::string("policies: ") + which +
                         " has negative probabilities");
      if (std::abs(p.row(s).sum() - 1.0) > kStochasticTol)
        throw InputError(std::string("policies: ") + which +
                         " row does not sum to 1");
    }
  };
  check_rows(target, "target");
  check_rows(behavior, "behavior");
  if (!(behavior.minCoeff() > 0.0))
    throw InputError("policies: behavior coverage violated, "
                     "behavior(a|s) must be positive for every (s, a)");
}

FactorSpec FactorSpec::on_policy() { return {}; }

FactorSpec FactorSpec::off_policy() {
  FactorSpec f;
  f.preset = FactorPreset::off_policy;
  return f;
}

FactorSpec FactorSpec::q_trace(double c_bar, double rho_bar) {
  FactorSpec f;
  f.preset = FactorPreset::q_trace;
  f.c_bar = c_bar;
  f.rho_bar = rho_bar;
  return f;
}

FactorSpec FactorSpec::retrace(double lambda) {
  FactorSpec f;
  f.preset = FactorPreset::retrace;
  f.lambda = lambda;
  return f;
}

FactorSpec FactorSpec::tree_backup(double lambda) {
  FactorSpec f;
  f.preset = FactorPreset::tree_backup;
  f.lambda = lambda;
  return f;
}

FactorSpec FactorSpec::q_pi(double lambda) {
  FactorSpec f;
  f.preset = FactorPreset::q_pi;
  f.lambda = lambda;
  return f;
}

FactorSpec FactorSpec::custom(Eigen::MatrixXd c, Eigen::MatrixXd rho) {
  FactorSpec f;
  f.preset = FactorPreset::custom;
  f.c_table = std::move(c);
  f.rho_table = std::move(rho);
  return f;
}

std::string FactorSpec::name() const {
  switch (preset) {
    case FactorPreset::on_policy: return "on_policy";
    case FactorPreset::off_policy: return "off_policy";
    case FactorPreset::q_trace: return "q_trace";
    case FactorPreset::retrace: return "retrace";
    case FactorPreset::tree_backup: return "tree_backup";
    case FactorPreset::q_pi: return "q_pi";
    case FactorPreset::custom: return "custom";
  }
  return "unknown";
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> FactorSpec::expand(
    const PolicyPair& policies) const {
  const Eigen::MatrixXd ratio =
      policies.target.cwiseQuotient(policies.behavior);
  const auto ones = [&] {
    return Eigen::MatrixXd::Ones(ratio.rows(), ratio.cols());
  };
  switch (preset) {
    case FactorPreset::on_policy:
      return {ones(), ones()};
    case FactorPreset::off_policy:
      return {ratio, ratio};
    case FactorPreset::q_trace:
      return {ratio.cwiseMin(c_bar), ratio.cwiseMin(rho_bar)};
    case FactorPreset::retrace:
      return {lambda * ratio.cwiseMin(1.0), ratio};
    case FactorPreset::tree_backup:
      return {lambda * policies.target, ratio};
    case FactorPreset::q_pi:
      return {Eigen::MatrixXd::Constant(ratio.rows(), ratio.cols(), lambda),
              ratio};
    case FactorPreset::custom: {
      if (c_table.rows() != ratio.rows() || c_table.cols() != ratio.cols() ||
          rho_table.rows() != ratio.rows() || rho_table.cols() != ratio.cols())
        throw InputError("factors: custom table shape mismatch");
      if (c_table.minCoeff() < 0.0 || rho_table.minCoeff() < 0.0)
        throw InputError("factors: custom tables must be nonnegative");
      return {c_table, rho_table};
    }
  }
  throw InputError("factors: unknown preset");
}

FiniteMarkovChain behavior_sa_chain(const FiniteMDP& mdp,
                                    const PolicyPair& policies) {
  mdp.validate();
  policies.validate(mdp.n_states, mdp.n_actions);
  const int sa = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(sa, sa);
  std::vector<std::string> labels(sa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int x = s * mdp.n_actions + a;
      labels[x] = sa_label(x, mdp.n_actions);
      for (int sp = 0; sp < mdp.n_states; ++sp)
        for (int ap = 0; ap < mdp.n_actions; ++ap)
          P(x, sp * mdp.n_actions + ap) =
              mdp.transition[a](s, sp) * policies.behavior(sp, ap);
    }
  return FiniteMarkovChain(std::move(labels), std::move(P));
}

WindowChain build_window_chain(const FiniteMDP& mdp, const PolicyPair& policies,
                               int N, int max_windows) {
  if (N < 1) throw InputError("window chain: horizon N must be >= 1");
  FiniteMarkovChain sa_chain = behavior_sa_chain(mdp, policies);
  if (!sa_chain.irreducible())
    throw StructureError("window chain: behavior state-action chain is reducible");
  if (!sa_chain.aperiodic_on_recurrent())
    throw StructureError("window chain: behavior state-action chain is periodic");

  const Eigen::MatrixXd& P_sa = sa_chain.transition();
  const int sa = sa_chain.n_states();

  // Depth-N product expansion pruned by positive path probability,
  // lexicographic order.
  std::vector<std::vector<int>> windows;
  std::vector<int> path;
  const std::function<void(int)> extend = [&](int depth) {
    if (depth == N + 1) {
      if (static_cast<int>(windows.size()) >= max_windows)
        throw ConfigError("window chain: window count exceeds the cap of " +
                          std::to_string(max_windows));
      windows.push_back(path);
      return;
    }
    if (depth == 0) {
      for (int x = 0; x < sa; ++x) {
        path.push_back(x);
        extend(1);
        path.pop_back();
      }
      return;
    }
    const int prev = path.back();
    for (int x = 0; x < sa; ++x) {
      if (P_sa(prev, x) <= 0.0) continue;
      path.push_back(x);
      extend(depth + 1);
      path.pop_back();
    }
  };
  extend(0);

  std::map<std::vector<int>, int> index;
  for (int i = 0; i < static_cast<int>(windows.size()); ++i)
    index[windows[i]] = i;

  const int W = static_cast<int>(windows.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(W, W);
  for (int i = 0; i < W; ++i) {
    const int last = windows[i].back();
    std::vector<int> shifted(windows[i].begin() + 1, windows[i].end());
    shifted.push_back(0);
    for (int x = 0; x < sa; ++x) {
      if (P_sa(last, x) <= 0.0) continue;
      shifted.back() = x;
      P(i, index.at(shifted)) = P_sa(last, x);
    }
  }

  std::vector<std::string> labels(W);
  for (int i = 0; i < W; ++i) {
    std::ostringstream os;
    for (std::size_t j = 0; j < windows[i].size(); ++j) {
      if (j) os << '|';
      os << sa_label(windows[i][j], mdp.n_actions);
    }
    labels[i] = os.str();
  }
  FiniteMarkovChain chain(std::move(labels), std::move(P));

  // Restrict to the closed class (the full set when the behavior chain is
  // irreducible, but transient windows are dropped defensively).
  const std::vector<int>& cls = chain.recurrent_class();
  if (static_cast<int>(cls.size()) != W) {
    std::vector<std::vector<int>> kept;
    kept.reserve(cls.size());
    for (int i : cls) kept.push_back(windows[i]);
    FiniteMarkovChain restricted = chain.restricted_to_recurrent();
    return {std::move(restricted), std::move(kept)};
  }
  return {std::move(chain), std::move(windows)};
}

Eigen::VectorXd GtdModel::td_increment(const Eigen::VectorXd& w, int y) const {
  if (static_cast<int>(w.size()) != dim_)
    throw InputError("td_increment: w has wrong dimension");
  const std::vector<int>& win = windows_.at(y);
  const auto c_of = [&](int x) { return c_(x / mdp_.n_actions, x % mdp_.n_actions); };
  const auto rho_of = [&](int x) {
    return rho_(x / mdp_.n_actions, x % mdp_.n_actions);
  };
  const auto r_of = [&](int x) {
    return mdp_.reward(x / mdp_.n_actions, x % mdp_.n_actions);
  };
  double scale = 1.0;  // gamma^i prod_{j=1..i} c_j
  double total = 0.0;
  for (int i = 0; i < horizon_; ++i) {
    if (i > 0) scale *= mdp_.gamma * c_of(win[i]);
    const double delta = r_of(win[i]) +
                         mdp_.gamma * rho_of(win[i + 1]) *
                             features_.col(win[i + 1]).dot(w) -
                         features_.col(win[i]).dot(w);
    total += scale * delta;
  }
  return features_.col(win[0]) * total;
}

GtdModel GtdModel::build(FiniteMDP mdp, PolicyPair policies, FactorSpec factors,
                         GtdOptions opts) {
  mdp.validate();
  policies.validate(mdp.n_states, mdp.n_actions);
  WindowChain wc =
      build_window_chain(mdp, policies, opts.horizon, opts.max_windows);
  FiniteMarkovChain behavior = behavior_sa_chain(mdp, policies);

  const int sa = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd features = opts.features;
  if (features.size() == 0)
    features = Eigen::MatrixXd::Identity(sa, sa);
  if (features.cols() != sa)
    throw InputError("gtd: features need one column per state-action pair");
  if (!features.allFinite()) throw InputError("gtd: features must be finite");
  const int d = static_cast<int>(features.rows());

  auto [c, rho] = factors.expand(policies);

  // Per-window affine data A(y), b(y).
  const int W = static_cast<int>(wc.windows.size());
  std::vector<Eigen::MatrixXd> A(W);
  std::vector<Eigen::VectorXd> b(W);
  for (int y = 0; y < W; ++y) {
    const std::vector<int>& win = wc.windows[y];
    Eigen::MatrixXd Ay = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd by = Eigen::VectorXd::Zero(d);
    double scale = 1.0;
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(d);
    double rew = 0.0;
    for (int i = 0; i < opts.horizon; ++i) {
      const int xi = win[i];
      const int xn = win[i + 1];
      if (i > 0)
        scale *= mdp.gamma * c(win[i] / mdp.n_actions, win[i] % mdp.n_actions);
      const double rho_next =
          rho(xn / mdp.n_actions, xn % mdp.n_actions);
      coeff += scale * (mdp.gamma * rho_next * features.col(xn) -
                        features.col(xi));
      rew += scale * mdp.reward(xi / mdp.n_actions, xi % mdp.n_actions);
    }
    Ay = features.col(win[0]) * coeff.transpose();
    by = -features.col(win[0]) * rew;
    A[y] = std::move(Ay);
    b[y] = std::move(by);
  }

  const Eigen::VectorXd& varpi = wc.chain.stationary_distribution();
  Eigen::MatrixXd A_bar = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b_bar = Eigen::VectorXd::Zero(d);
  for (int y = 0; y < W; ++y) {
    A_bar += varpi(y) * A[y];
    b_bar += varpi(y) * b[y];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A_bar);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    Eigen::VectorXcd ev = A_bar.eigenvalues();
    std::ostringstream os;
    os << "gtd: mean matrix is singular; spectrum:";
    for (int i = 0; i < ev.size(); ++i)
      os << " (" << ev(i).real() << (ev(i).imag() < 0 ? "" : "+")
         << ev(i).imag() << "i)";
    throw ModelError(os.str());
  }
  Eigen::VectorXd w_star = lu.solve(b_bar);

  const HurwitzCheck hurwitz = is_hurwitz(A_bar);
  if (!hurwitz.hurwitz) {
    Eigen::VectorXcd ev = A_bar.eigenvalues();
    std::ostringstream os;
    os << "gtd: mean matrix is not Hurwitz (spectral abscissa "
       << hurwitz.abscissa << "); spectrum:";
    for (int i = 0; i < ev.size(); ++i)
      os << " (" << ev(i).real() << (ev(i).imag() < 0 ? "" : "+")
         << ev(i).imag() << "i)";
    throw ModelError(os.str());
  }

  const ContractionSetup setup = contraction_setup(
      A_bar, default_beta_grid(A_bar, opts.beta_grid_points, opts.beta_grid_lo));

  // Poisson solution for the SA update F(w, y) = beta (A(y) w - b(y)).
  std::vector<Eigen::MatrixXd> A_F(W);
  std::vector<Eigen::VectorXd> b_F(W);
  for (int y = 0; y < W; ++y) {
    A_F[y] = setup.beta * A[y];
    b_F[y] = setup.beta * b[y];
  }
  AffinePoissonSolution poisson = affine_poisson(wc.chain, A_F, b_F);

  Norm norm = Norm::quadratic(setup.P);
  double lip_F = 0.0, lip_H = 0.0;
  for (int y = 0; y < W; ++y) {
    lip_F = std::fmax(lip_F, p_norm_operator_norm(A_F[y], setup.P));
    lip_F = std::fmax(lip_F, norm.value(A_F[y] * w_star - b_F[y]));
    lip_H = std::fmax(lip_H, p_norm_operator_norm(poisson.G[y], setup.P));
    lip_H = std::fmax(lip_H, norm.value(poisson.eval(w_star, y)));
  }

  GtdModel m(std::move(wc.chain), std::move(behavior), std::move(norm));
  m.mdp_ = std::move(mdp);
  m.policies_ = std::move(policies);
  m.c_ = std::move(c);
  m.rho_ = std::move(rho);
  m.horizon_ = opts.horizon;
  m.dim_ = d;
  m.features_ = std::move(features);
  m.windows_ = std::move(wc.windows);
  m.A_ = std::move(A);
  m.b_ = std::move(b);
  m.A_bar_ = std::move(A_bar);
  m.b_bar_ = std::move(b_bar);
  m.w_star_ = std::move(w_star);
  m.beta_ = setup.beta;
  m.P_gtd_ = setup.P;
  m.kappa_ = setup.kappa;
  m.poisson_ = std::move(poisson);
  m.lip_F_ = lip_F;
  m.lip_H_ = lip_H;
  return m;
}

int GtdModel::initial_window_from_state(int s0, std::uint64_t seed) const {
  if (s0 < 0 || s0 >= mdp_.n_states)
    throw InputError("gtd: start state out of range");
  // Stream 2 is reserved for the warm-up walk; the engine uses 0 and 1.
  CounterRng rng(seed, /*stream=*/2);
  const auto pick = [&](const Eigen::VectorXd& probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < probs.size(); ++i) {
      if (probs(i) <= 0.0) continue;
      acc += probs(i);
      last = i;
      if (u < acc) return i;
    }
    return last;
  };
  std::vector<int> path;
  int s = s0;
  int a = pick(policies_.behavior.row(s).transpose());
  path.push_back(sa_index(s, a));
  for (int i = 0; i < horizon_; ++i) {
    const Eigen::VectorXd next_state = mdp_.transition[a].row(s).transpose();
    s = pick(next_state);
    a = pick(policies_.behavior.row(s).transpose());
    path.push_back(sa_index(s, a));
  }
  for (int y = 0; y < n_windows(); ++y)
    if (windows_[y] == path) return y;
  throw NumericalError("gtd: warm-up walk produced an unenumerated window");
}

FiniteMDP random_mdp(std::uint64_t seed, int n_states, int n_actions,
                     double gamma) {
  FiniteMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  CounterRng rng(seed, /*stream=*/7);
  mdp.transition.assign(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) {
      Eigen::VectorXd row(n_states);
      for (int sp = 0; sp < n_states; ++sp) row(sp) = rng.exponential();
      mdp.transition[a].row(s) = (row / row.sum()).transpose();
    }
  mdp.reward.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
  mdp.validate();
  return mdp;
}

Eigen::MatrixXd random_policy(std::uint64_t seed, int n_states, int n_actions) {
  CounterRng rng(seed, /*stream=*/8);
  Eigen::MatrixXd p(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    Eigen::VectorXd row(n_actions);
    for (int a = 0; a < n_actions; ++a) row(a) = rng.exponential();
    p.row(s) = (row / row.sum()).transpose();
  }
  return p;
}

}  // namespace sadrift
