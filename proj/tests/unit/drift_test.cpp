#include "sadrift/drift.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sadrift/gtd.hpp"
#include "test_helpers.hpp"

using namespace sadrift;
using namespace sadrift::testing;

namespace {

GtdModel certification_model(bool on_policy) {
  const FiniteMDP mdp = desk_mdp();
  PolicyPair pol;
  pol.behavior = random_policy(4243, 3, 2);
  pol.target = on_policy ? pol.behavior : random_policy(4244, 3, 2);
  return GtdModel::build(mdp, pol,
                         on_policy ? FactorSpec::on_policy()
                                   : FactorSpec::retrace(0.9));
}

struct CertSetup {
  GtdModel model;
  MoreauEnvelope env;
  Schedule sched;
  DriftConstants constants;
};

CertSetup make_cert_setup(bool on_policy, double a, double eta) {
  GtdModel model = certification_model(on_policy);
  const double xi = choose_xi(model.kappa(), model.contraction_norm(), 0.5);
  MoreauEnvelope env(model.contraction_norm(), xi);
  Schedule sched(model.alpha_effective(a), eta);
  DriftConstants constants = compute_constants(model, env, sched);
  return {std::move(model), std::move(env), sched, constants};
}

}  // namespace

TEST_CASE("shifted energy basics") {
  auto setup = make_cert_setup(true, 0.4, 0.8);
  const auto& [model, env, sched, constants] = setup;

  SUBCASE("vanishes at the fixed point with K = 0") {
    for (int y = 0; y < model.n_windows(); ++y)
      CHECK(shifted_energy(model, env, 0.0, sched, 5, model.w_star(), y) ==
            0.0);
  }

  SUBCASE("reduces to the envelope as the learning rate vanishes") {
    CounterRng rng(61, 0);
    const Eigen::VectorXd w = model.w_star() + random_vector(rng, model.dim());
    const Eigen::VectorXd e = w - model.w_star();
    const double v = shifted_energy(model, env, constants.K, sched,
                                    100000000L, w, 0);
    CHECK(v == doctest::Approx(env.envelope(e)).epsilon(1e-6));
  }

  SUBCASE("poisson term vanishes on an iid window chain") {
    // additive model over an iid chain has H = centered m, but a constant
    // noise table gives H = 0
    Eigen::MatrixXd P(3, 3);
    for (int i = 0; i < 3; ++i) P.row(i) << 0.2, 0.3, 0.5;
    std::vector<Eigen::VectorXd> m(3, Eigen::VectorXd::Constant(2, 1.5));
    AdditiveNoiseModel flat(FiniteMarkovChain({}, P), m, 0.5);
    CHECK(flat.lip_H() == 0.0);
    MoreauEnvelope env2(flat.contraction_norm(), 1.0);
    CounterRng rng(62, 0);
    const Eigen::VectorXd theta = random_vector(rng, 2);
    const double a3 = sched.rate(3);
    CHECK(shifted_energy(flat, env2, 2.0, sched, 3, theta, 1) ==
          doctest::Approx(env2.envelope(theta) + 2.0 * a3 * a3)
              .epsilon(1e-12));
  }
}

TEST_CASE("exact conditional expectation") {
  auto setup = make_cert_setup(false, 0.4, 0.8);
  const auto& [model, env, sched, constants] = setup;
  CounterRng rng(63, 0);

  SUBCASE("deterministic successor rows reduce to a point evaluation") {
    GtdModel tiny = [] {
      FiniteMDP mdp;
      mdp.n_states = 1;
      mdp.n_actions = 1;
      mdp.gamma = 0.5;
      mdp.transition = {Eigen::MatrixXd::Ones(1, 1)};
      mdp.reward = Eigen::MatrixXd::Constant(1, 1, 1.0);
      PolicyPair pol;
      pol.target = Eigen::MatrixXd::Ones(1, 1);
      pol.behavior = pol.target;
      return GtdModel::build(mdp, pol, FactorSpec::on_policy());
    }();
    MoreauEnvelope tiny_env(tiny.contraction_norm(), 1.0);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.3);
    const Eigen::VectorXd next =
        theta + sched.rate(4) * tiny.update(theta, 0);
    CHECK(exact_conditional_expectation(tiny, tiny_env, 1.5, sched, 4, theta,
                                        0) ==
          doctest::Approx(shifted_energy(tiny, tiny_env, 1.5, sched, 5, next,
                                         0))
              .epsilon(1e-14));
  }

  SUBCASE("monte carlo oracle over sampled successors") {
    const Eigen::VectorXd theta =
        model.w_star() + random_vector(rng, model.dim(), 2.0);
    const int y = 2;
    const long n = 30;
    const double exact = exact_conditional_expectation(
        model, env, constants.K, sched, n, theta, y);
    // sample successors and average the shifted energy at time n+1
    const Eigen::MatrixXd& P = model.noise_chain().transition();
    const Eigen::VectorXd theta_next =
        theta + sched.rate(n) * model.update(theta, y);
    const long samples = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (long k = 0; k < samples; ++k) {
      const double u = rng.uniform();
      double acc = 0.0;
      int yp = model.n_windows() - 1;
      for (int j = 0; j < model.n_windows(); ++j) {
        acc += P(y, j);
        if (u < acc) {
          yp = j;
          break;
        }
      }
      const double v = shifted_energy(model, env, constants.K, sched, n + 1,
                                      theta_next, yp);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / samples;
    const double stderr_ =
        std::sqrt((sumsq / samples - mean * mean) / samples);
    CHECK(std::abs(exact - mean) <= 3.0 * stderr_ + 1e-12);
  }

  SUBCASE("linear in K") {
    const Eigen::VectorXd theta =
        model.w_star() + random_vector(rng, model.dim());
    const long n = 12;
    const double base = exact_conditional_expectation(model, env, 0.0, sched,
                                                      n, theta, 1);
    for (double K : {1.0, 7.5, 300.0}) {
      const double withK = exact_conditional_expectation(model, env, K, sched,
                                                         n, theta, 1);
      const double a_next = sched.rate(n + 1);
      CHECK(withK - base ==
            doctest::Approx(K * a_next * a_next).epsilon(1e-12));
    }
  }
}

TEST_CASE("computed constants") {
  SUBCASE("no poisson correction means K_xi = 0") {
    Eigen::MatrixXd P(3, 3);
    for (int i = 0; i < 3; ++i) P.row(i) << 0.2, 0.3, 0.5;
    std::vector<Eigen::VectorXd> m(3, Eigen::VectorXd::Zero(2));
    AdditiveNoiseModel flat(FiniteMarkovChain({}, P), m, 0.5);
    MoreauEnvelope env(flat.contraction_norm(), 1.0);
    const DriftConstants c = compute_constants(flat, env, Schedule(0.5, 0.8));
    CHECK(c.L_H == 0.0);
    CHECK(c.K_xi == 0.0);
  }

  SUBCASE("K_xi is quadratic in L_H") {
    CounterRng rng(64, 0);
    Eigen::MatrixXd P = random_stochastic_matrix(rng, 4);
    std::vector<Eigen::VectorXd> m(4);
    for (int y = 0; y < 4; ++y) m[y] = random_vector(rng, 3);
    std::vector<Eigen::VectorXd> m2(4);
    for (int y = 0; y < 4; ++y) m2[y] = 2.0 * m[y];
    AdditiveNoiseModel one(FiniteMarkovChain({}, P), m, 0.6);
    AdditiveNoiseModel two(FiniteMarkovChain({}, P), m2, 0.6);
    CHECK(two.lip_H() == doctest::Approx(2.0 * one.lip_H()).epsilon(1e-12));
    MoreauEnvelope env(one.contraction_norm(), 0.7);
    const Schedule sched(0.5, 0.8);
    const DriftConstants c1 = compute_constants(one, env, sched);
    const DriftConstants c2 = compute_constants(two, env, sched);
    CHECK(c2.K_xi == doctest::Approx(4.0 * c1.K_xi).epsilon(1e-10));
  }

  SUBCASE("L_F dominates random difference quotients") {
    auto setup = make_cert_setup(false, 0.4, 0.8);
    const auto& [model, env, sched, constants] = setup;
    const Norm& norm = model.contraction_norm();
    CounterRng rng(65, 0);
    for (int k = 0; k < 10000; ++k) {
      const Eigen::VectorXd w1 = random_vector(rng, model.dim(), 2.0);
      const Eigen::VectorXd w2 = random_vector(rng, model.dim(), 2.0);
      const int y = static_cast<int>(rng.uniform() * model.n_windows());
      const double quotient =
          norm.value(model.update(w1, y) - model.update(w2, y)) /
          norm.value(w1 - w2);
      CHECK(quotient <= constants.L_F + 1e-9);
    }
  }

  SUBCASE("tail index realizes both threshold conditions") {
    auto setup = make_cert_setup(false, 2.5, 0.8);
    const auto& [model, env, sched, constants] = setup;
    const double growth =
        constants.L_H * (constants.u_xi + 1.0) / constants.ell_xi;
    const long n = constants.N_tail;
    CHECK(sched.rate(n) <= 1.0);
    CHECK(growth * sched.rate(n) <= 0.125 + 1e-15);
    if (n > 0) {
      const bool earlier_ok =
          sched.rate(n - 1) <= 1.0 && growth * sched.rate(n - 1) <= 0.125;
      CHECK_FALSE(earlier_ok);
    }
  }
}

TEST_CASE("drift certification") {
  SUBCASE("stationary fixed-point trajectory with H = 0") {
    Eigen::MatrixXd P(2, 2);
    P << 0.4, 0.6, 0.7, 0.3;
    std::vector<Eigen::VectorXd> m(2, Eigen::VectorXd::Zero(2));
    AdditiveNoiseModel model(FiniteMarkovChain({}, P), m, 0.5);
    MoreauEnvelope env(model.contraction_norm(), 1.0);
    const Schedule sched(0.9, 1.0);
    const DriftConstants constants = compute_constants(model, env, sched);
    RunOptions opt;
    opt.n_steps = constants.N_tail + 600;
    opt.seed = 1;
    opt.dense_lo = constants.N_tail;
    opt.dense_hi = opt.n_steps;
    opt.theta0 = Eigen::VectorXd::Zero(2);  // theta* exactly
    const Trajectory traj = run(model, sched, opt);
    const DriftCertificate cert =
        certify_drift(traj, model, env, constants, sched, 500);
    CHECK(cert.pass);
    CHECK(cert.min_slack >= -kDriftTolerance);
  }

  SUBCASE("generalized TD certification passes with real slack") {
    for (const bool on_policy : {true, false}) {
      auto setup = make_cert_setup(on_policy, 0.5, 0.8);
      const auto& [model, env, sched, constants] = setup;
      RunOptions opt;
      opt.n_steps = constants.N_tail + 1100;
      opt.seed = 12;
      opt.dense_lo = constants.N_tail;
      opt.dense_hi = opt.n_steps;
      const Trajectory traj = run(model, sched, opt);
      const DriftCertificate cert =
          certify_drift(traj, model, env, constants, sched, 1000);
      CHECK(cert.pass);
      CHECK(cert.coercivity_ok);
      CHECK(cert.drift_ok);
      CHECK(cert.min_slack >= -kDriftTolerance);
      CHECK(cert.first_passing_index == constants.N_tail);

      // parallel and serial certification agree exactly
      const DriftCertificate ser =
          certify_drift_serial(traj, model, env, constants, sched, 1000);
      CHECK(ser.min_slack == cert.min_slack);
      CHECK(ser.steps.size() == cert.steps.size());

      // certificates serialize with a summary and one record per step
      std::ostringstream os;
      write_certificate(cert, os);
      CHECK(os.str().find("min_slack") != std::string::npos);
    }
  }

  SUBCASE("nonlinear model certifies, and a mutated drift rate fails") {
    AdditiveNoiseModel model = make_additive_model(5150, 4, 2, 0.5, 0.5);
    MoreauEnvelope env(model.contraction_norm(), 1.0);
    const Schedule sched(0.5, 0.8);
    const DriftConstants constants = compute_constants(model, env, sched);
    RunOptions opt;
    opt.n_steps = constants.N_tail + 2100;
    opt.seed = 12;
    opt.dense_lo = constants.N_tail;
    opt.dense_hi = opt.n_steps;
    opt.theta0 = Eigen::VectorXd::Constant(2, 1e6);
    const Trajectory traj = run(model, sched, opt);

    const DriftCertificate good =
        certify_drift(traj, model, env, constants, sched, 2000);
    CHECK(good.pass);
    CHECK(good.min_slack >= -kDriftTolerance);

    DriftConstants mutated = constants;
    mutated.mu *= 10.0;
    const DriftCertificate cert =
        certify_drift(traj, model, env, mutated, sched, 2000);
    CHECK_FALSE(cert.pass);
    CHECK(cert.min_slack < -kDriftTolerance);
    CHECK(cert.first_passing_index == -1);
  }

  SUBCASE("sparse trajectories are rejected") {
    auto setup = make_cert_setup(true, 0.5, 0.8);
    const auto& [model, env, sched, constants] = setup;
    RunOptions opt;
    opt.n_steps = constants.N_tail + 100;
    opt.seed = 1;
    const Trajectory traj = run(model, sched, opt);  // no dense records
    CHECK_THROWS_AS(
        certify_drift(traj, model, env, constants, sched, 50), InputError);
  }
}

TEST_CASE("scalar recursion oracle") {
  SUBCASE("a factor of zero collapses the recursion") {
    const ScalarRecursionResult r =
        scalar_recursion_oracle(2.0, 0.0, Schedule(1.0, 1.0), 0.9, 1.0, 10000);
    CHECK_FALSE(r.outside_theory);  // 0.9 < min(1, c0 alpha) = 1
    CHECK(r.passes);
    CHECK(r.tail_max_last == 0.0);
  }

  SUBCASE("decay witness inside and outside the admissible range") {
    const Schedule sched(1.0, 0.75);
    const ScalarRecursionResult inside =
        scalar_recursion_oracle(1.0, 1.0, sched, 0.4, 1.0, 1000000);
    CHECK_FALSE(inside.outside_theory);  // 0.4 < 2 eta - 1 = 0.5
    CHECK(inside.passes);

    const ScalarRecursionResult outside =
        scalar_recursion_oracle(1.0, 1.0, sched, 0.6, 1.0, 1000000);
    CHECK(outside.outside_theory);
    CHECK_FALSE(outside.passes);
  }
}

TEST_CASE("weighted almost-supermartingale conditions") {
  SUBCASE("harmonic coefficients with unit weights") {
    const auto beta = [](long n) { return 1.0 / (n + 1); };
    const auto b = [](long) { return 0.0; };
    const auto q = [](long) { return 1.0; };
    const WeightedRsResult r = weighted_rs_check(beta, b, q, 100000);
    CHECK(r.range_ok);
    CHECK(r.divergence_ok);
    CHECK(r.summable_ok);
    CHECK(r.conditions_ok);
    // gamma_n = beta_n in this regime
    CHECK(r.gamma_head[10] == doctest::Approx(1.0 / 11).epsilon(1e-12));
  }

  SUBCASE("polynomial weights against a harmonic schedule") {
    const double c_alpha = 0.8, zeta = 0.5;
    const auto beta = [=](long n) { return c_alpha / (n + 1); };
    const auto b = [](long) { return 0.0; };
    const auto q = [=](long n) { return std::pow(n + 1.0, zeta); };
    const WeightedRsResult r = weighted_rs_check(beta, b, q, 100000);
    CHECK(r.conditions_ok);
    // gamma_n ~ (c alpha - zeta) / (n + 1) on the tail
    const long n = 1000;
    const double expected = (c_alpha - zeta) / (n + 1);
    CHECK(r.gamma_head.size() >= 512);
    const double gamma_n =
        1.0 - (q(n + 1) / q(n)) * (1.0 - beta(n));
    CHECK(gamma_n == doctest::Approx(expected).epsilon(1e-2));
    // (n+1) gamma_n decreases to c alpha - zeta from above
    CHECK(r.min_harmonic_coeff > 0.0);
    CHECK(r.min_harmonic_coeff ==
          doctest::Approx(c_alpha - zeta).epsilon(1e-3));
  }

  SUBCASE("summability witness for a square-summable error sequence") {
    const double eta = 0.75, zeta = 0.4;
    const auto beta = [](long n) { return 0.8 / (n + 1); };
    const auto b = [=](long n) { return std::pow(n + 1.0, -2.0 * eta); };
    const auto q = [=](long n) { return std::pow(n + 1.0, zeta); };
    const WeightedRsResult r = weighted_rs_check(beta, b, q, 1000000);
    CHECK(r.summable_ok);
    CHECK(r.decade_ratio <= 0.9);
    CHECK(r.conditions_ok);
  }

  SUBCASE("a divergent weighted error series is rejected") {
    const auto beta = [](long n) { return 0.8 / (n + 1); };
    const auto b = [](long n) { return 1.0 / (n + 1.0); };  // harmonic
    const auto q = [](long) { return 1.0; };
    const WeightedRsResult r = weighted_rs_check(beta, b, q, 1000000);
    CHECK_FALSE(r.summable_ok);
  }
}
