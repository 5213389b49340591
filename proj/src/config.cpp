#include "sadrift/config.hpp"

#include <cstdio>
#include <fstream>

#include "sadrift/errors.hpp"

namespace sadrift {

namespace {

using nlohmann::json;

FactorPreset preset_from_name(const std::string& name) {
  if (name == "on_policy") return FactorPreset::on_policy;
  if (name == "off_policy") return FactorPreset::off_policy;
  if (name == "q_trace") return FactorPreset::q_trace;
  if (name == "retrace") return FactorPreset::retrace;
  if (name == "tree_backup") return FactorPreset::tree_backup;
  if (name == "q_pi") return FactorPreset::q_pi;
  if (name == "custom") return FactorPreset::custom;
  throw ConfigError("unknown factor preset '" + name + "'");
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError("expected a matrix (array of arrays)");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw ConfigError("ragged matrix in config");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = seed_lo; s <= seed_hi; ++s) out.push_back(s);
  return out;
}

long ExperimentConfig::effective_tail_hi() const {
  if (tail_hi > 0) return tail_hi;
  return eta < 1.0 ? 100000L : 1000000L;
}

void ExperimentConfig::validate() const {
  if (mdp.source != "random" && mdp.source != "explicit")
    throw ConfigError("mdp.source must be random or explicit");
  if (policies.source != "random" && policies.source != "explicit")
    throw ConfigError("policies.source must be random or explicit");
  if (mdp.n_states <= 0 || mdp.n_actions <= 0)
    throw ConfigError("mdp sizes must be positive");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0))
    throw ConfigError("gamma must lie in (0, 1)");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (max_windows < 1 || max_windows > 20000)
    throw ConfigError("max_windows must lie in [1, 20000]");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(a > 0.0)) throw ConfigError("stepsize constant must be positive");
  if (!(margin > 0.0 && margin < 1.0))
    throw ConfigError("margin must lie in (0, 1)");
  if (xi < 0.0) throw ConfigError("xi must be positive (or 0 for automatic)");
  if (steps < 0) throw ConfigError("steps must be nonnegative");
  if (seed_hi < seed_lo) throw ConfigError("empty seed range");
  if (init != "stationary" && init != "fixed_state")
    throw ConfigError("init must be stationary or fixed_state");
  if (certify_window < 1) throw ConfigError("certify window must be positive");
  for (double z : zetas)
    if (!(z > 0.0)) throw ConfigError("zeta values must be positive");
  if (verify_samples < 10) throw ConfigError("verify_samples too small");
  if (features != "tabular") throw ConfigError("features must be tabular");
  if (envelope_norm.kind != "contraction" && envelope_norm.kind != "euclidean" &&
      envelope_norm.kind != "max" && envelope_norm.kind != "weighted_max" &&
      envelope_norm.kind != "quadratic")
    throw ConfigError("unknown envelope norm kind '" + envelope_norm.kind + "'");
}

ExperimentConfig default_config() { return {}; }

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("mdp")) {
      const json& md = m.at("mdp");
      read_into(md, "source", cfg.mdp.source);
      read_into(md, "seed", cfg.mdp.seed);
      read_into(md, "n_states", cfg.mdp.n_states);
      read_into(md, "n_actions", cfg.mdp.n_actions);
      read_into(md, "gamma", cfg.mdp.gamma);
      if (md.contains("transition")) {
        cfg.mdp.transition.clear();
        for (const json& t : md.at("transition"))
          cfg.mdp.transition.push_back(matrix_from_json(t));
      }
      if (md.contains("reward"))
        cfg.mdp.reward = matrix_from_json(md.at("reward"));
    }
    if (m.contains("policies")) {
      const json& p = m.at("policies");
      read_into(p, "source", cfg.policies.source);
      read_into(p, "seed", cfg.policies.seed);
      read_into(p, "on_policy", cfg.policies.on_policy);
      if (p.contains("target"))
        cfg.policies.target = matrix_from_json(p.at("target"));
      if (p.contains("behavior"))
        cfg.policies.behavior = matrix_from_json(p.at("behavior"));
    }
    if (m.contains("factors")) {
      const json& f = m.at("factors");
      std::string preset = "on_policy";
      read_into(f, "preset", preset);
      cfg.factors.preset = preset_from_name(preset);
      read_into(f, "lambda", cfg.factors.lambda);
      read_into(f, "c_bar", cfg.factors.c_bar);
      read_into(f, "rho_bar", cfg.factors.rho_bar);
      if (f.contains("c")) cfg.factors.c_table = matrix_from_json(f.at("c"));
      if (f.contains("rho"))
        cfg.factors.rho_table = matrix_from_json(f.at("rho"));
    }
    read_into(m, "horizon", cfg.horizon);
    read_into(m, "features", cfg.features);
    read_into(m, "max_windows", cfg.max_windows);
    if (m.contains("beta_grid")) {
      read_into(m.at("beta_grid"), "points", cfg.beta_points);
      read_into(m.at("beta_grid"), "lo", cfg.beta_lo);
    }
  }
  if (j.contains("envelope")) {
    const json& e = j.at("envelope");
    if (e.contains("xi")) {
      if (e.at("xi").is_string()) {
        if (e.at("xi").get<std::string>() != "auto")
          throw ConfigError("envelope.xi must be a number or \"auto\"");
        cfg.xi = 0.0;
      } else {
        cfg.xi = e.at("xi").get<double>();
      }
    }
    read_into(e, "margin", cfg.margin);
    read_into(e, "default_xi", cfg.default_xi);
    if (e.contains("norm")) {
      const json& n = e.at("norm");
      read_into(n, "kind", cfg.envelope_norm.kind);
      if (n.contains("weights")) {
        const auto w = n.at("weights").get<std::vector<double>>();
        cfg.envelope_norm.weights =
            Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
      }
      if (n.contains("matrix"))
        cfg.envelope_norm.matrix = matrix_from_json(n.at("matrix"));
    }
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    if (s.contains("a") && s.contains("alpha"))
      throw ConfigError("schedule: give either a or alpha, not both");
    if (s.contains("alpha")) {
      cfg.a = s.at("alpha").get<double>();
      cfg.a_is_alpha = true;
    }
    read_into(s, "a", cfg.a);
    read_into(s, "eta", cfg.eta);
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    read_into(r, "steps", cfg.steps);
    read_into(r, "seed_lo", cfg.seed_lo);
    read_into(r, "seed_hi", cfg.seed_hi);
    read_into(r, "init", cfg.init);
    read_into(r, "start_state", cfg.start_state);
    read_into(r, "checkpoint_ratio", cfg.checkpoint_ratio);
    read_into(r, "divergence_threshold", cfg.divergence_threshold);
  }
  if (j.contains("certify"))
    read_into(j.at("certify"), "window_steps", cfg.certify_window);
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    if (r.contains("zetas")) cfg.zetas = r.at("zetas").get<std::vector<double>>();
    read_into(r, "norm", cfg.rate_norm);
    read_into(r, "tail_lo", cfg.tail_lo);
    read_into(r, "tail_hi", cfg.tail_hi);
  }
  if (j.contains("verify"))
    read_into(j.at("verify"), "samples", cfg.verify_samples);
  if (j.contains("output")) read_into(j.at("output"), "dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json mdp = {{"source", cfg.mdp.source},     {"seed", cfg.mdp.seed},
              {"n_states", cfg.mdp.n_states}, {"n_actions", cfg.mdp.n_actions},
              {"gamma", cfg.mdp.gamma}};
  if (cfg.mdp.source == "explicit") {
    json ts = json::array();
    for (const Eigen::MatrixXd& t : cfg.mdp.transition)
      ts.push_back(matrix_to_json(t));
    mdp["transition"] = std::move(ts);
    mdp["reward"] = matrix_to_json(cfg.mdp.reward);
  }
  json pol = {{"source", cfg.policies.source},
              {"seed", cfg.policies.seed},
              {"on_policy", cfg.policies.on_policy}};
  if (cfg.policies.source == "explicit") {
    pol["target"] = matrix_to_json(cfg.policies.target);
    pol["behavior"] = matrix_to_json(cfg.policies.behavior);
  }
  json fac = {{"preset", cfg.factors.name()},
              {"lambda", cfg.factors.lambda},
              {"c_bar", cfg.factors.c_bar},
              {"rho_bar", cfg.factors.rho_bar}};
  if (cfg.factors.preset == FactorPreset::custom) {
    fac["c"] = matrix_to_json(cfg.factors.c_table);
    fac["rho"] = matrix_to_json(cfg.factors.rho_table);
  }
  j["model"] = {{"mdp", std::move(mdp)},
                {"policies", std::move(pol)},
                {"factors", std::move(fac)},
                {"horizon", cfg.horizon},
                {"features", cfg.features},
                {"max_windows", cfg.max_windows},
                {"beta_grid", {{"points", cfg.beta_points}, {"lo", cfg.beta_lo}}}};
  if (cfg.xi > 0.0)
    j["envelope"] = {{"xi", cfg.xi}};
  else
    j["envelope"] = {{"xi", "auto"}};
  j["envelope"]["margin"] = cfg.margin;
  j["envelope"]["default_xi"] = cfg.default_xi;
  j["envelope"]["norm"] = {{"kind", cfg.envelope_norm.kind}};
  if (cfg.envelope_norm.weights.size() > 0) {
    std::vector<double> w(cfg.envelope_norm.weights.data(),
                          cfg.envelope_norm.weights.data() +
                              cfg.envelope_norm.weights.size());
    j["envelope"]["norm"]["weights"] = w;
  }
  if (cfg.envelope_norm.matrix.size() > 0)
    j["envelope"]["norm"]["matrix"] = matrix_to_json(cfg.envelope_norm.matrix);
  if (cfg.a_is_alpha)
    j["schedule"] = {{"alpha", cfg.a}, {"eta", cfg.eta}};
  else
    j["schedule"] = {{"a", cfg.a}, {"eta", cfg.eta}};
  j["run"] = {{"steps", cfg.steps},
              {"seed_lo", cfg.seed_lo},
              {"seed_hi", cfg.seed_hi},
              {"init", cfg.init},
              {"start_state", cfg.start_state},
              {"checkpoint_ratio", cfg.checkpoint_ratio},
              {"divergence_threshold", cfg.divergence_threshold}};
  j["certify"] = {{"window_steps", cfg.certify_window}};
  j["rates"] = {{"zetas", cfg.zetas},
                {"norm", cfg.rate_norm},
                {"tail_lo", cfg.tail_lo},
                {"tail_hi", cfg.tail_hi}};
  j["verify"] = {{"samples", cfg.verify_samples}};
  j["output"] = {{"dir", cfg.out_dir}};
  return j;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // The hash identifies the experiment; the output location is not part
  // of it.
  json j = config_to_json(cfg);
  j.erase("output");
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sadrift
