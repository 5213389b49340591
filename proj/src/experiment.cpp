#include "sadrift/experiment.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "sadrift/rng.hpp"

namespace sadrift {

Experiment build_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  FiniteMDP mdp;
  if (cfg.mdp.source == "random") {
    mdp = random_mdp(cfg.mdp.seed, cfg.mdp.n_states, cfg.mdp.n_actions,
                     cfg.mdp.gamma);
  } else {
    mdp.n_states = cfg.mdp.n_states;
    mdp.n_actions = cfg.mdp.n_actions;
    mdp.gamma = cfg.mdp.gamma;
    mdp.transition = cfg.mdp.transition;
    mdp.reward = cfg.mdp.reward;
    mdp.validate();
  }

  PolicyPair policies;
  if (cfg.policies.source == "random") {
    policies.behavior =
        random_policy(cfg.policies.seed, mdp.n_states, mdp.n_actions);
    policies.target = cfg.policies.on_policy
                          ? policies.behavior
                          : random_policy(cfg.policies.seed + 1, mdp.n_states,
                                          mdp.n_actions);
  } else {
    policies.target = cfg.policies.target;
    policies.behavior = cfg.policies.behavior;
  }
  policies.validate(mdp.n_states, mdp.n_actions);

  GtdOptions opts;
  opts.horizon = cfg.horizon;
  opts.max_windows = cfg.max_windows;
  opts.beta_grid_points = cfg.beta_points;
  opts.beta_grid_lo = cfg.beta_lo;
  GtdModel model = GtdModel::build(std::move(mdp), std::move(policies),
                                   cfg.factors, std::move(opts));

  const double xi =
      cfg.xi > 0.0 ? cfg.xi
                   : choose_xi(model.kappa(), model.contraction_norm(),
                               cfg.margin, cfg.default_xi);
  MoreauEnvelope envelope(model.contraction_norm(), xi);

  const double alpha = cfg.a_is_alpha ? cfg.a : model.alpha_effective(cfg.a);
  Schedule schedule(alpha, cfg.eta);

  std::optional<DriftConstants> constants;
  if (model.kappa() * envelope.u_xi() / envelope.ell_xi() < 1.0)
    constants = compute_constants(model, envelope, schedule);

  Experiment ex{cfg,
                std::move(model),
                std::move(envelope),
                schedule,
                constants,
                config_hash(cfg)};
  return ex;
}

RunOptions make_run_options(const Experiment& ex, long steps, long dense_lo,
                            long dense_hi) {
  RunOptions opt;
  opt.n_steps = steps;
  opt.checkpoints = geometric_checkpoints(steps, ex.config.checkpoint_ratio);
  opt.dense_lo = dense_lo;
  opt.dense_hi = dense_hi;
  opt.divergence_threshold = ex.config.divergence_threshold;
  if (ex.config.init == "fixed_state") {
    const GtdModel* model = &ex.model;
    const int start = ex.config.start_state;
    opt.initial_window = [model, start](std::uint64_t seed) {
      return model->initial_window_from_state(start, seed);
    };
  }
  return opt;
}

Tracking make_tracking(const Experiment& ex) {
  Tracking t;
  t.envelope = &ex.envelope;
  if (!ex.constants) return t;  // no energy column without admissible xi
  const GtdModel* model = &ex.model;
  const MoreauEnvelope* env = &ex.envelope;
  const double K = ex.constants->K;
  const Schedule sched = ex.schedule;
  t.shifted_energy = [model, env, K, sched](long n, const Eigen::VectorXd& w,
                                            int y) {
    return shifted_energy(*model, *env, K, sched, n, w, y);
  };
  return t;
}

namespace {

PropertyResult worst_violation(const std::string& name, double worst,
                               double tol, const std::string& detail = "") {
  PropertyResult r;
  r.name = name;
  r.worst = worst;
  r.pass = worst <= tol;
  r.detail = detail;
  return r;
}

}  // namespace

namespace {

Norm resolve_property_norm(const ExperimentConfig::NormSpec& spec,
                           const GtdModel& model) {
  const int d = model.dim();
  if (spec.kind == "contraction") return model.contraction_norm();
  if (spec.kind == "euclidean") return Norm::euclidean(d);
  if (spec.kind == "max") return Norm::max(d);
  if (spec.kind == "weighted_max") {
    if (spec.weights.size() != d)
      throw ConfigError("envelope norm weights must match the model dimension");
    return Norm::weighted_max(spec.weights);
  }
  if (spec.matrix.rows() != d || spec.matrix.cols() != d)
    throw ConfigError("envelope norm matrix must match the model dimension");
  return Norm::quadratic(spec.matrix);
}

}  // namespace

VerifyReport run_verification(const Experiment& ex) {
  VerifyReport report;
  // envelope-only properties run on the configured base norm; the
  // model-coupled probes always use the contraction norm
  const Norm property_norm =
      resolve_property_norm(ex.config.envelope_norm, ex.model);
  const MoreauEnvelope property_env(property_norm, ex.envelope.xi());
  const MoreauEnvelope& env = property_env;
  const GtdModel& model = ex.model;
  const int d = model.dim();
  const int samples = ex.config.verify_samples;
  const double tol = 1e-8;

  CounterRng rng(0xace5u, /*stream=*/11);
  const auto randvec = [&](double scale) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
    return v;
  };

  {  // admissibility of the smoothing parameter
    const double ratio =
        model.kappa() * ex.envelope.u_xi() / ex.envelope.ell_xi();
    report.results.push_back(worst_violation(
        "xi_contraction_admissibility", ratio - 1.0, -1e-12,
        "kappa*u_xi/ell_xi = " + std::to_string(ratio) + " must stay below 1"));
  }

  {  // 1/xi smoothness of the envelope gradient
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd x = randvec(2.0), y = randvec(2.0);
      const double lhs = (env.gradient(x) - env.gradient(y)).norm();
      worst = std::fmax(worst, lhs - (x - y).norm() / env.xi());
    }
    report.results.push_back(worst_violation("envelope_smoothness", worst, tol));
  }

  {  // ell_xi m(x) <= |x| <= u_xi m(x)
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd x = randvec(2.0);
      const double m = env.m_norm(x);
      const double v = env.base().value(x);
      worst = std::fmax(worst, env.ell_xi() * m - v);
      worst = std::fmax(worst, v - env.u_xi() * m);
    }
    report.results.push_back(
        worst_violation("envelope_norm_equivalence", worst, tol));
  }

  {  // |<grad M(x), y>| <= m(x) m(y)  and  <grad M(x), x> >= m(x)^2
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd x = randvec(2.0), y = randvec(2.0);
      const Eigen::VectorXd g = env.gradient(x);
      worst = std::fmax(worst,
                        std::abs(g.dot(y)) - env.m_norm(x) * env.m_norm(y));
      const double m = env.m_norm(x);
      worst = std::fmax(worst, m * m - g.dot(x));
    }
    report.results.push_back(
        worst_violation("envelope_gradient_inequalities", worst, tol));
  }

  {  // m_norm is a norm: triangle inequality and homogeneity
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd x = randvec(2.0), y = randvec(2.0);
      worst = std::fmax(worst,
                        env.m_norm(x + y) - env.m_norm(x) - env.m_norm(y));
      const double t = rng.uniform(-3.0, 3.0);
      worst = std::fmax(
          worst, std::abs(env.m_norm(t * x) - std::abs(t) * env.m_norm(x)));
    }
    report.results.push_back(worst_violation("m_norm_axioms", worst, tol));
  }

  if (ex.xi_admissible()) {
    // mean drift probe: <grad M(e), f(theta)> <= -mu M(e), in the
    // contraction norm's envelope
    const MoreauEnvelope& cenv = ex.envelope;
    const double mu = mu_xi(model.kappa(), cenv);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd w = model.w_star() + randvec(3.0);
      const Eigen::VectorXd e = w - model.w_star();
      const Eigen::VectorXd f =
          model.beta() * (model.A_bar() * w - model.b_bar());
      worst = std::fmax(worst,
                        cenv.gradient(e).dot(f) + mu * cenv.envelope(e));
    }
    report.results.push_back(worst_violation("mean_drift_probe", worst, tol));
  } else {
    PropertyResult r;
    r.name = "mean_drift_probe";
    r.pass = false;
    r.worst = std::numeric_limits<double>::infinity();
    r.detail = "skipped: xi is inadmissible, no smoothed drift rate exists";
    report.results.push_back(std::move(r));
  }

  {  // Poisson residual H_theta - P H_theta - (F - f) = 0 at random theta
    double worst = 0.0;
    const int thetas = 100;
    for (int k = 0; k < thetas; ++k) {
      const Eigen::VectorXd w = randvec(2.0);
      const Eigen::VectorXd f =
          model.beta() * (model.A_bar() * w - model.b_bar());
      for (int y = 0; y < model.n_windows(); ++y) {
        const Eigen::VectorXd resid = model.poisson_eval(w, y) -
                                      model.poisson_predicted(w, y) -
                                      (model.update(w, y) - f);
        worst = std::fmax(worst, resid.cwiseAbs().maxCoeff());
      }
    }
    report.results.push_back(
        worst_violation("poisson_residual", worst, 1e-9));
  }

  {  // contraction setup: kappa < 1 and the quadratic-norm residual
    report.results.push_back(worst_violation(
        "contraction_kappa", model.kappa() - 1.0, -1e-12,
        "kappa = " + std::to_string(model.kappa())));
    const Eigen::MatrixXd resid =
        model.A_bar().transpose() * model.P_gtd() +
        model.P_gtd() * model.A_bar() +
        Eigen::MatrixXd::Identity(d, d);
    report.results.push_back(worst_violation(
        "lyapunov_residual", resid.cwiseAbs().maxCoeff(), 1e-8));
  }

  {  // mean map is a kappa-contraction in the quadratic norm
    double worst = -std::numeric_limits<double>::infinity();
    const Norm& norm = model.contraction_norm();
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd w1 = randvec(3.0), w2 = randvec(3.0);
      const Eigen::VectorXd t1 =
          w1 + model.beta() * (model.A_bar() * w1 - model.b_bar());
      const Eigen::VectorXd t2 =
          w2 + model.beta() * (model.A_bar() * w2 - model.b_bar());
      worst = std::fmax(worst, norm.value(t1 - t2) -
                                   model.kappa() * norm.value(w1 - w2));
    }
    report.results.push_back(
        worst_violation("mean_map_contraction", worst, 1e-9));
  }

  report.all_pass = true;
  for (const PropertyResult& r : report.results)
    report.all_pass = report.all_pass && r.pass;
  return report;
}

void write_verify_report(const VerifyReport& report, const std::string& hash,
                         std::ostream& os) {
  nlohmann::json j;
  j["config_hash"] = hash;
  j["all_pass"] = report.all_pass;
  nlohmann::json items = nlohmann::json::array();
  for (const PropertyResult& r : report.results) {
    nlohmann::json item = {{"name", r.name},
                           {"pass", r.pass},
                           {"worst_violation", r.worst}};
    if (!r.detail.empty()) item["detail"] = r.detail;
    items.push_back(std::move(item));
  }
  j["properties"] = std::move(items);
  os << j.dump(2) << "\n";
}

}  // namespace sadrift
