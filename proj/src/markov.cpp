#include "sadrift/markov.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace sadrift {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kHurwitzTol = 1e-10;

// Tarjan strongly connected components on the positive-transition graph,
// iterative to cope with long chains.
struct Scc {
  int n_components = 0;
  std::vector<int> component;  // state -> component id (reverse topological)
};

Scc strongly_connected_components(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  Scc out;
  out.component.assign(n, -1);
  std::vector<int> index(n, -1), lowlink(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int next_index = 0;

  struct Frame {
    int v;
    int next_child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    index[root] = lowlink[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      bool descended = false;
      while (f.next_child < n) {
        const int w = f.next_child++;
        if (P(f.v, w) <= 0.0) continue;
        if (index[w] == -1) {
          index[w] = lowlink[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) lowlink[f.v] = std::min(lowlink[f.v], index[w]);
      }
      if (descended) continue;
      const int v = f.v;
      if (lowlink[v] == index[v]) {
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          out.component[w] = out.n_components;
          if (w == v) break;
        }
        ++out.n_components;
      }
      call.pop_back();
      if (!call.empty())
        lowlink[call.back().v] = std::min(lowlink[call.back().v], lowlink[v]);
    }
  }
  return out;
}

// gcd of cycle lengths within one class, via BFS levels.
bool class_is_aperiodic(const Eigen::MatrixXd& P, const std::vector<int>& cls) {
  if (cls.size() == 1) return P(cls[0], cls[0]) > 0.0;
  const int n = static_cast<int>(P.rows());
  std::vector<int> depth(n, -1);
  std::vector<char> in_class(n, 0);
  for (int s : cls) in_class[s] = 1;
  std::vector<int> queue = {cls[0]};
  depth[cls[0]] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int v = queue[head];
    for (int w = 0; w < n; ++w) {
      if (P(v, w) <= 0.0 || !in_class[w]) continue;
      if (depth[w] == -1) {
        depth[w] = depth[v] + 1;
        queue.push_back(w);
      }
    }
  }
  long g = 0;
  for (int v : cls)
    for (int w = 0; w < n; ++w) {
      if (P(v, w) <= 0.0 || !in_class[w]) continue;
      g = std::gcd(g, static_cast<long>(depth[v] + 1 - depth[w]));
    }
  return g == 1;
}

}  // namespace

struct FiniteMarkovChain::Analysis {
  std::once_flag structure_once;
  std::once_flag pi_once;
  std::once_flag lu_once;

  // structure
  int n_closed = 0;
  std::vector<int> recurrent;  // unique closed class when n_closed == 1
  bool covers_all = false;
  bool aperiodic = false;

  Eigen::VectorXd pi;
  Eigen::PartialPivLU<Eigen::MatrixXd> fundamental_lu;
};

FiniteMarkovChain::FiniteMarkovChain(std::vector<std::string> states,
                                     Eigen::MatrixXd P)
    : states_(std::move(states)),
      P_(std::move(P)),
      cache_(std::make_shared<Analysis>()) {
  const int n = static_cast<int>(P_.rows());
  if (n == 0 || P_.cols() != n)
    throw InputError("markov chain: transition matrix must be square and nonempty");
  if (states_.empty()) {
    states_.resize(n);
    for (int i = 0; i < n; ++i) states_[i] = std::to_string(i);
  }
  if (static_cast<int>(states_.size()) != n)
    throw InputError("markov chain: state labels do not match matrix size");
  for (int i = 0; i < n; ++i) {
    if (P_.row(i).minCoeff() < 0.0)
      throw InputError("markov chain: negative transition probability in row " +
                       std::to_string(i));
    if (std::abs(P_.row(i).sum() - 1.0) > kRowSumTol)
      throw InputError("markov chain: row " + std::to_string(i) +
                       " sums to " + std::to_string(P_.row(i).sum()));
  }
}

const FiniteMarkovChain::Analysis& FiniteMarkovChain::analysis() const {
  std::call_once(cache_->structure_once, [&] {
    const int n = n_states();
    const Scc scc = strongly_connected_components(P_);
    // A component is closed when it has no positive edge leaving it.
    std::vector<char> closed(scc.n_components, 1);
    for (int v = 0; v < n; ++v)
      for (int w = 0; w < n; ++w)
        if (P_(v, w) > 0.0 && scc.component[w] != scc.component[v])
          closed[scc.component[v]] = 0;
    int closed_id = -1;
    for (int c = 0; c < scc.n_components; ++c)
      if (closed[c]) {
        ++cache_->n_closed;
        closed_id = c;
      }
    if (cache_->n_closed == 1) {
      for (int v = 0; v < n; ++v)
        if (scc.component[v] == closed_id) cache_->recurrent.push_back(v);
      cache_->covers_all = static_cast<int>(cache_->recurrent.size()) == n;
      cache_->aperiodic = class_is_aperiodic(P_, cache_->recurrent);
    }
  });
  return *cache_;
}

int FiniteMarkovChain::n_closed_classes() const { return analysis().n_closed; }

bool FiniteMarkovChain::irreducible() const {
  const Analysis& a = analysis();
  return a.n_closed == 1 && a.covers_all;
}

bool FiniteMarkovChain::aperiodic_on_recurrent() const {
  const Analysis& a = analysis();
  if (a.n_closed != 1)
    throw StructureError("markov chain: multiple closed classes");
  return a.aperiodic;
}

const std::vector<int>& FiniteMarkovChain::recurrent_class() const {
  const Analysis& a = analysis();
  if (a.n_closed != 1)
    throw StructureError("markov chain: " + std::to_string(a.n_closed) +
                         " closed classes, expected exactly one");
  return a.recurrent;
}

FiniteMarkovChain FiniteMarkovChain::restricted_to_recurrent() const {
  const std::vector<int>& cls = recurrent_class();
  const int m = static_cast<int>(cls.size());
  Eigen::MatrixXd Q(m, m);
  std::vector<std::string> labels(m);
  for (int i = 0; i < m; ++i) {
    labels[i] = states_[cls[i]];
    for (int j = 0; j < m; ++j) Q(i, j) = P_(cls[i], cls[j]);
  }
  return FiniteMarkovChain(std::move(labels), std::move(Q));
}

const Eigen::VectorXd& FiniteMarkovChain::stationary_distribution() const {
  const std::vector<int>& cls = recurrent_class();
  std::call_once(cache_->pi_once, [&] {
    const int n = n_states();
    const int m = static_cast<int>(cls.size());
    // Solve pi (I - P) = 0 with sum pi = 1 on the closed class; the first
    // balance equation is replaced by the normalization (the system is rank
    // deficient by one on an irreducible class).
    Eigen::MatrixXd M(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        M(i, j) = (i == j ? 1.0 : 0.0) - P_(cls[j], cls[i]);
    M.row(0).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(0) = 1.0;
    Eigen::VectorXd pi_cls = M.partialPivLu().solve(rhs);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) pi(cls[i]) = std::max(pi_cls(i), 0.0);
    pi /= pi.sum();
    if (((pi.transpose() * P_).transpose() - pi).cwiseAbs().maxCoeff() > 1e-10)
      throw NumericalError("markov chain: stationary distribution residual too large");
    cache_->pi = std::move(pi);
  });
  return cache_->pi;
}

void FiniteMarkovChain::require_ergodic(const char* op) const {
  recurrent_class();
  if (!aperiodic_on_recurrent())
    throw StructureError(std::string(op) +
                         ": chain is periodic on its recurrent class");
}

Eigen::MatrixXd FiniteMarkovChain::poisson_solve(const Eigen::MatrixXd& g) const {
  if (g.rows() != n_states())
    throw InputError("poisson_solve: g must have one row per state");
  require_ergodic("poisson_solve");
  const Eigen::VectorXd& pi = stationary_distribution();
  std::call_once(cache_->lu_once, [&] {
    const int n = n_states();
    Eigen::MatrixXd Z_inv = Eigen::MatrixXd::Identity(n, n) - P_ +
                            Eigen::VectorXd::Ones(n) * pi.transpose();
    cache_->fundamental_lu.compute(Z_inv);
  });
  const Eigen::MatrixXd centered =
      g - Eigen::VectorXd::Ones(n_states()) * (pi.transpose() * g);
  return cache_->fundamental_lu.solve(centered);
}

AffinePoissonSolution affine_poisson(const FiniteMarkovChain& chain,
                                     const std::vector<Eigen::MatrixXd>& A,
                                     const std::vector<Eigen::VectorXd>& b) {
  const int n = chain.n_states();
  if (static_cast<int>(A.size()) != n || static_cast<int>(b.size()) != n)
    throw InputError("affine_poisson: need one A and b per state");
  const int d = static_cast<int>(b[0].size());

  // One Poisson solve for all d^2 + d coordinate functions.
  Eigen::MatrixXd g(n, d * d + d);
  for (int y = 0; y < n; ++y) {
    if (A[y].rows() != d || A[y].cols() != d || b[y].size() != d)
      throw InputError("affine_poisson: inconsistent dimensions");
    for (int c = 0; c < d; ++c) g.block(y, c * d, 1, d) = A[y].col(c).transpose();
    g.block(y, d * d, 1, d) = b[y].transpose();
  }
  const Eigen::MatrixXd h_all = chain.poisson_solve(g);

  AffinePoissonSolution sol;
  sol.G.resize(n);
  sol.h.resize(n);
  for (int y = 0; y < n; ++y) {
    sol.G[y].resize(d, d);
    for (int c = 0; c < d; ++c)
      sol.G[y].col(c) = h_all.block(y, c * d, 1, d).transpose();
    sol.h[y] = h_all.block(y, d * d, 1, d).transpose();
  }
  const Eigen::MatrixXd& P = chain.transition();
  sol.PG.assign(n, Eigen::MatrixXd::Zero(d, d));
  sol.Ph.assign(n, Eigen::VectorXd::Zero(d));
  for (int y = 0; y < n; ++y)
    for (int yp = 0; yp < n; ++yp) {
      if (P(y, yp) == 0.0) continue;
      sol.PG[y] += P(y, yp) * sol.G[yp];
      sol.Ph[y] += P(y, yp) * sol.h[yp];
    }
  return sol;
}

HurwitzCheck is_hurwitz(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw InputError("is_hurwitz: matrix must be square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("is_hurwitz: eigensolver failed");
  const double abscissa = es.eigenvalues().real().maxCoeff();
  return {abscissa < -kHurwitzTol, abscissa};
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A) {
  const auto check = is_hurwitz(A);
  if (!check.hurwitz)
    throw InputError("solve_lyapunov: matrix is not Hurwitz (abscissa " +
                     std::to_string(check.abscissa) + ")");
  const int d = static_cast<int>(A.rows());
  // vec(A'P + PA) = (I (x) A' + A' (x) I) vec(P)
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d * d, d * d);
  const Eigen::MatrixXd At = A.transpose();
  for (int j = 0; j < d; ++j)
    K.block(j * d, j * d, d, d) += At;
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        K(j * d + i, k * d + i) += At(j, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d * d);
  for (int i = 0; i < d; ++i) rhs(i * d + i) = -1.0;
  const Eigen::VectorXd p = K.partialPivLu().solve(rhs);
  Eigen::MatrixXd P(d, d);
  for (int j = 0; j < d; ++j) P.col(j) = p.segment(j * d, d);
  P = ((P + P.transpose()) / 2.0).eval();
  const double residual =
      (A.transpose() * P + P * A + Eigen::MatrixXd::Identity(d, d))
          .cwiseAbs()
          .maxCoeff();
  if (residual > 1e-8)
    throw NumericalError("solve_lyapunov: residual " + std::to_string(residual));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("solve_lyapunov: solution is not positive definite");
  return P;
}

double p_norm_operator_norm(const Eigen::MatrixXd& B, const Eigen::MatrixXd& P) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success)
    throw InputError("p_norm_operator_norm: P must be positive definite");
  // |B|_P = sqrt(lambda_max(L^{-1} B' P B L^{-T})), P = L L'.
  Eigen::MatrixXd M = B.transpose() * P * B;
  M = llt.matrixL().solve(M);
  M = llt.matrixL().solve(M.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      ((M + M.transpose()) / 2.0).eval());
  return std::sqrt(std::fmax(es.eigenvalues().maxCoeff(), 0.0));
}

ContractionSetup contraction_setup(const Eigen::MatrixXd& A_bar,
                                   const std::vector<double>& beta_grid) {
  if (beta_grid.empty())
    throw InputError("contraction_setup: empty beta grid");
  Eigen::MatrixXd P = solve_lyapunov(A_bar);
  const int d = static_cast<int>(A_bar.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  double best_beta = 0.0;
  double best_kappa = std::numeric_limits<double>::infinity();
  for (double beta : beta_grid) {
    if (!(beta > 0.0))
      throw InputError("contraction_setup: beta grid must be positive");
    const double kappa = p_norm_operator_norm(I + beta * A_bar, P);
    if (kappa < best_kappa) {
      best_kappa = kappa;
      best_beta = beta;
    }
  }
  if (!(best_kappa < 1.0))
    throw ConfigError(
        "contraction_setup: no grid point yields a contraction (best kappa " +
        std::to_string(best_kappa) + "); refine the beta grid");
  return {best_beta, std::move(P), best_kappa};
}

std::vector<double> default_beta_grid(const Eigen::MatrixXd& A_bar, int points,
                                      double lo) {
  const double spectral = A_bar.jacobiSvd().singularValues()(0);
  const double hi = 1.0 / std::fmax(spectral, 1e-300);
  if (!(hi > lo)) return {hi};
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
  return grid;
}

}  // namespace sadrift
