#include "sadrift/rates.hpp"

#include <cmath>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace sadrift;
using namespace sadrift::testing;

namespace {

// Synthetic trajectory with |e_n| = scale * (n+1)^(-eta/2) * noise.
Trajectory power_law_trajectory(std::uint64_t seed, long horizon, double eta,
                                double scale, double noise_level) {
  Trajectory t;
  t.seed = seed;
  t.n_steps = horizon;
  CounterRng rng(seed, /*stream=*/31);
  for (long n : geometric_checkpoints(horizon)) {
    CheckpointRecord r;
    r.n = n;
    const double noise = 1.0 + noise_level * rng.normal();
    const double err =
        scale * std::pow(n + 1.0, -eta / 2.0) * std::fabs(noise);
    r.err_contraction = r.err_euclid = r.err_mnorm = err;
    t.checkpoints.push_back(r);
  }
  return t;
}

Trajectory constant_trajectory(long horizon, double err) {
  Trajectory t;
  t.n_steps = horizon;
  for (long n : geometric_checkpoints(horizon)) {
    CheckpointRecord r;
    r.n = n;
    r.err_contraction = r.err_euclid = r.err_mnorm = err;
    t.checkpoints.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("pathwise decay witness") {
  SUBCASE("constant error fails for any positive zeta") {
    const Trajectory t = constant_trajectory(100000, 0.3);
    const PathwiseStats st =
        pathwise_rate(t, 0.5, ErrorNormChoice::contraction);
    CHECK_FALSE(st.pass);
    CHECK(st.decay_ratio > 1.0);
  }

  SUBCASE("deterministic power law passes below the decay exponent") {
    // |e_n|^2 = (n+1)^(-eta); s_n ~ (n+1)^(zeta - eta), ratio ~ 10^(zeta-eta)
    const Trajectory t = power_law_trajectory(0, 100000, 0.8, 1.0, 0.0);
    const PathwiseStats st =
        pathwise_rate(t, 0.5, ErrorNormChoice::contraction);
    CHECK(st.pass);
    CHECK(st.decay_ratio == doctest::Approx(std::pow(10, -0.3)).epsilon(0.05));
    // margin below 0.16 decades is not certified by the 0.7 witness
    const PathwiseStats tight =
        pathwise_rate(t, 0.75, ErrorNormChoice::contraction);
    CHECK_FALSE(tight.pass);
  }

  SUBCASE("verdicts are monotone in zeta") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Trajectory t = power_law_trajectory(seed, 100000, 0.8, 2.0, 0.4);
      double prev_ratio = -1.0;
      for (double zeta : {0.2, 0.35, 0.5, 0.65}) {
        const PathwiseStats st =
            pathwise_rate(t, zeta, ErrorNormChoice::contraction);
        if (prev_ratio >= 0.0) CHECK(prev_ratio <= st.decay_ratio + 1e-12);
        prev_ratio = st.decay_ratio;
      }
    }
  }

  SUBCASE("short horizons are rejected") {
    const Trajectory t = constant_trajectory(5000, 1.0);
    CHECK_THROWS_AS(pathwise_rate(t, 0.5, ErrorNormChoice::contraction),
                    InputError);
  }

  SUBCASE("ensemble aggregation tags out-of-window zeta") {
    std::vector<Trajectory> ens;
    for (std::uint64_t s = 0; s < 20; ++s)
      ens.push_back(power_law_trajectory(s, 100000, 0.8, 1.0, 0.2));
    const auto window = rate_window(0.8, 0.5, 1.0);
    const EnsemblePathwise in =
        pathwise_ensemble(ens, 0.5, window, ErrorNormChoice::contraction);
    CHECK_FALSE(in.outside_theory);
    CHECK(in.n_pass >= 19);
    const EnsemblePathwise out =
        pathwise_ensemble(ens, 0.7, window, ErrorNormChoice::contraction);
    CHECK(out.outside_theory);  // 0.7 > 2 eta - 1 = 0.6
  }
}

TEST_CASE("log-log regression") {
  SUBCASE("exact power law is recovered to machine precision") {
    std::vector<double> x, y;
    for (int k = 0; k < 40; ++k) {
      const double n = 1000.0 * std::pow(1.2, k);
      x.push_back(n);
      y.push_back(3.7 * std::pow(n, -0.8));
    }
    const SlopeFit fit = fit_loglog(x, y);
    CHECK(std::abs(fit.slope + 0.8) < 1e-6);
    CHECK(fit.stderr_ < 1e-6);
  }

  SUBCASE("l2 slope on synthetic ensembles") {
    std::vector<Trajectory> ens;
    for (std::uint64_t s = 0; s < 50; ++s)
      ens.push_back(power_law_trajectory(s, 100000, 0.8, 1.0, 0.0));
    const L2Report rep = l2_slope(ens, ErrorNormChoice::contraction, 0.8,
                                  1000, 100000, /*mu_alpha=*/0.0);
    CHECK(rep.fit.slope == doctest::Approx(-0.8).epsilon(1e-6));
    CHECK(rep.target_slope == -0.8);
    CHECK(rep.n_seeds == 50);
  }

  SUBCASE("constant ensembles fit a zero slope") {
    std::vector<Trajectory> ens(60, constant_trajectory(100000, 0.4));
    const L2Report rep = l2_slope(ens, ErrorNormChoice::contraction, 0.8,
                                  1000, 100000, 0.0);
    CHECK(std::abs(rep.fit.slope) < 1e-12);
  }

  SUBCASE("stderr shrinks like the square root of the ensemble size") {
    const auto stderr_of = [](int k) {
      std::vector<Trajectory> ens;
      for (int s = 0; s < k; ++s)
        ens.push_back(
            power_law_trajectory(1000 + s, 100000, 0.8, 1.0, 0.25));
      return l2_slope(ens, ErrorNormChoice::contraction, 0.8, 1000, 100000,
                      0.0)
          .fit.stderr_;
    };
    const double se_small = stderr_of(40);
    const double se_big = stderr_of(160);
    // fourfold seeds should halve the stderr, within a factor of 2
    const double improvement = se_small / se_big;
    CHECK(improvement > 1.0);
    CHECK(improvement < 4.0);
  }

  SUBCASE("degenerate zero means produce the sentinel slope") {
    std::vector<Trajectory> ens(60, constant_trajectory(100000, 0.0));
    const L2Report rep = l2_slope(ens, ErrorNormChoice::contraction, 0.8,
                                  1000, 100000, 0.0);
    CHECK(rep.degenerate);
    CHECK(std::isinf(rep.fit.slope));
    CHECK(rep.fit.slope < 0);
  }

  SUBCASE("narrow fit windows are rejected") {
    std::vector<Trajectory> ens(30, power_law_trajectory(3, 100000, 0.8, 1, 0));
    CHECK_THROWS_AS(l2_slope(ens, ErrorNormChoice::contraction, 0.8, 90000,
                             100000, 0.0),
                    InputError);
  }
}

TEST_CASE("admissible rate windows") {
  {
    const auto [lo, hi] = rate_window(0.8, 0.5, 1.0);
    CHECK(lo == 0.0);
    CHECK(hi == doctest::Approx(0.6).epsilon(1e-14));
  }
  {
    const auto [lo, hi] = rate_window(1.0, 0.5, 2.0);
    CHECK(hi == 1.0);  // min(1, 2 * 0.5 * 2) = 1
  }
  {
    const auto [lo, hi] = rate_window(1.0, 0.9, 1.0);
    CHECK(hi == doctest::Approx(0.2).epsilon(1e-14));
  }
  {
    const auto [lo, hi] = rate_window(0.4, 0.5, 1.0);
    CHECK(hi == 0.0);  // empty: pathwise theory needs eta > 1/2
  }
}
