#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sadrift/gtd.hpp"

namespace sadrift {

// Experiment description, read from a single JSON config file. Every field
// has a default; the canonical serialization (all fields, sorted keys) is
// hashed to key output directories so that distinct configs never collide.
struct ExperimentConfig {
  struct MdpSpec {
    std::string source = "random";  // random | explicit
    std::uint64_t seed = 1;
    int n_states = 3;
    int n_actions = 2;
    double gamma = 0.5;
    std::vector<Eigen::MatrixXd> transition;  // explicit only
    Eigen::MatrixXd reward;                   // explicit only
  } mdp;

  struct PolicySpec {
    std::string source = "random";  // random | explicit
    std::uint64_t seed = 2;
    bool on_policy = true;  // random source: reuse the behavior draw as target
    Eigen::MatrixXd target, behavior;  // explicit only
  } policies;

  FactorSpec factors;
  int horizon = 1;
  std::string features = "tabular";
  int max_windows = 20000;
  int beta_points = 32;
  double beta_lo = 1e-3;

  double xi = 0.0;  // 0: choose automatically
  double margin = 0.5;
  double default_xi = 1.0;
  // base norm for the envelope property suites: "contraction" (the model's
  // Lyapunov norm) or an explicit kind with payload
  struct NormSpec {
    std::string kind = "contraction";  // euclidean | max | weighted_max | quadratic
    Eigen::VectorXd weights;           // weighted_max
    Eigen::MatrixXd matrix;            // quadratic
  } envelope_norm;

  double a = 1.0;  // raw stepsize constant; a_is_alpha treats it as a/beta
  bool a_is_alpha = false;
  double eta = 0.8;

  long steps = 100000;
  std::uint64_t seed_lo = 0, seed_hi = 99;
  std::string init = "stationary";  // stationary | fixed_state
  int start_state = 0;
  double checkpoint_ratio = 1.1;
  double divergence_threshold = 1e12;

  long certify_window = 10000;

  std::vector<double> zetas = {0.5};
  std::string rate_norm = "gtd";
  long tail_lo = 1000;
  long tail_hi = 0;  // 0: default per eta (1e5 for eta < 1, 1e6 for eta = 1)

  int verify_samples = 1000;
  std::string out_dir = "out";

  std::vector<std::uint64_t> seeds() const;
  long effective_tail_hi() const;
  void validate() const;
};

ExperimentConfig default_config();
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

// FNV-1a over the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace sadrift
