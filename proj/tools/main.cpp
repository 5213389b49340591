#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sadrift/experiment.hpp"

namespace fs = std::filesystem;
using namespace sadrift;

namespace {

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  long steps = -1;
  std::string zetas;
};

ExperimentConfig resolve_config(const Overrides& ov) {
  ExperimentConfig cfg = ov.config_path.empty()
                             ? default_config()
                             : load_config_file(ov.config_path);
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (ov.steps >= 0) cfg.steps = ov.steps;
  if (!ov.seeds.empty()) {
    const auto sep = ov.seeds.find("..");
    if (sep == std::string::npos)
      throw ConfigError("--seeds expects a range a..b");
    try {
      cfg.seed_lo = std::stoull(ov.seeds.substr(0, sep));
      cfg.seed_hi = std::stoull(ov.seeds.substr(sep + 2));
    } catch (const std::exception&) {
      throw ConfigError("--seeds expects a numeric range a..b");
    }
  }
  if (!ov.zetas.empty()) {
    cfg.zetas.clear();
    std::stringstream ss(ov.zetas);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) cfg.zetas.push_back(std::stod(item));
  }
  cfg.validate();
  return cfg;
}

fs::path make_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / config_hash(cfg);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  os << contents;
}

nlohmann::json base_manifest(const Experiment& ex) {
  nlohmann::json m;
  m["config_hash"] = ex.hash;
  m["config"] = config_to_json(ex.config);
  m["beta"] = ex.model.beta();
  m["kappa"] = ex.model.kappa();
  m["xi"] = ex.envelope.xi();
  m["alpha"] = ex.schedule.alpha;
  m["eta"] = ex.schedule.eta;
  if (ex.constants) m["mu"] = ex.constants->mu;
  m["n_windows"] = ex.model.n_windows();
  m["dim"] = ex.model.dim();
  return m;
}

int cmd_verify(const ExperimentConfig& cfg) {
  const Experiment ex = build_experiment(cfg);
  const VerifyReport report = run_verification(ex);
  const fs::path dir = make_out_dir(cfg);
  std::ofstream os(dir / "verify_report.json");
  write_verify_report(report, ex.hash, os);
  for (const PropertyResult& r : report.results)
    std::cout << (r.pass ? "[pass] " : "[FAIL] ") << r.name
              << " (worst violation " << r.worst << ")\n";
  std::cout << "verify: " << (report.all_pass ? "all properties hold" : "FAILED")
            << "; report at " << (dir / "verify_report.json").string() << "\n";
  if (!report.all_pass) {
    for (const PropertyResult& r : report.results)
      if (!r.pass)
        std::cerr << "failing property: " << r.name
                  << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
    return 1;
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const Experiment ex = build_experiment(cfg);
  const fs::path dir = make_out_dir(cfg);
  const RunOptions base = make_run_options(ex, cfg.steps);
  const Tracking tracking = make_tracking(ex);
  const std::vector<std::uint64_t> seeds = cfg.seeds();

  nlohmann::json manifest = base_manifest(ex);
  manifest["steps"] = cfg.steps;
  manifest["seeds"] = seeds;

  std::vector<Trajectory> ensemble;
  try {
    ensemble = run_ensemble(ex.model, ex.schedule, base, seeds, tracking);
  } catch (const DivergenceError& e) {
    manifest["divergence"] = {{"seed", e.seed}, {"step", e.step}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cerr << "run: " << e.what() << "\n";
    return 3;
  }

  nlohmann::json files = nlohmann::json::array();
  for (const Trajectory& t : ensemble) {
    const std::string name = "traj_seed" + std::to_string(t.seed) + ".csv";
    std::ostringstream os;
    write_trajectory_csv(t, os);
    write_file(dir / name, os.str());
    files.push_back(name);
  }
  manifest["files"] = std::move(files);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "run: wrote " << ensemble.size() << " trajectories to "
            << dir.string() << "\n";
  return 0;
}

int cmd_certify(const ExperimentConfig& cfg) {
  const Experiment ex = build_experiment(cfg);
  const DriftConstants& constants = ex.require_constants();
  const long window_hi = constants.N_tail + cfg.certify_window;
  if (cfg.steps < window_hi)
    throw ConfigError(
        "certify: certification window [" +
        std::to_string(constants.N_tail) + ", " + std::to_string(window_hi) +
        "] exceeds the run horizon of " + std::to_string(cfg.steps) +
        " steps; increase run.steps");
  RunOptions opt = make_run_options(ex, cfg.steps, constants.N_tail,
                                    window_hi);
  opt.seed = cfg.seed_lo;
  const Trajectory traj = run(ex.model, ex.schedule, opt, make_tracking(ex));
  const DriftCertificate cert =
      certify_drift(traj, ex.model, ex.envelope, constants, ex.schedule,
                    cfg.certify_window);
  const fs::path dir = make_out_dir(cfg);
  std::ostringstream os;
  write_certificate(cert, os);
  write_file(dir / "certificate.txt", os.str());
  std::cout << "certify: window [" << cert.window_lo << ", " << cert.window_hi
            << "], min slack " << cert.min_slack << ", coercivity "
            << (cert.coercivity_ok ? "ok" : "VIOLATED") << " -> "
            << (cert.pass ? "PASS" : "FAIL") << "\n";
  if (!cert.pass && cert.first_passing_index >= 0)
    std::cout << "certify: earliest index from which all checks pass: "
              << cert.first_passing_index << "\n";
  return cert.pass ? 0 : 1;
}

int cmd_rates(const ExperimentConfig& cfg) {
  const Experiment ex = build_experiment(cfg);
  const fs::path dir = make_out_dir(cfg);
  const RunOptions base = make_run_options(ex, cfg.steps);
  const Tracking tracking = make_tracking(ex);
  const std::vector<Trajectory> ensemble =
      run_ensemble(ex.model, ex.schedule, base, cfg.seeds(), tracking);

  const ErrorNormChoice which = parse_error_norm(cfg.rate_norm);
  const auto window =
      rate_window(cfg.eta, ex.model.kappa(), ex.schedule.alpha);
  const long tail_hi = std::min(cfg.effective_tail_hi(), cfg.steps);
  if (cfg.eta == 1.0) ex.require_constants();
  const double mu_alpha =
      ex.constants ? ex.constants->mu * ex.schedule.alpha : 0.0;

  std::ostringstream summary;
  summary << "rate report (config " << ex.hash << ")\n";
  summary << "eta = " << cfg.eta << ", alpha = " << ex.schedule.alpha
          << ", kappa = " << ex.model.kappa();
  if (ex.constants) summary << ", mu = " << ex.constants->mu;
  summary << "\n";
  summary << "pathwise zeta window: (" << window.first << ", " << window.second
          << ")";
  if (window.second == 0.0) summary << "  [empty: eta <= 1/2]";
  summary << "\n";

  bool pathwise_all_ok = true;
  for (double zeta : cfg.zetas) {
    const EnsemblePathwise pw =
        pathwise_ensemble(ensemble, zeta, window, which);
    summary << "pathwise zeta=" << zeta << ": " << pw.n_pass << "/"
            << pw.n_seeds << " seeds pass the decay witness";
    if (pw.outside_theory) {
      summary << "  [outside-theory: no pass requirement]";
    } else if (pw.pass_fraction < 0.9) {
      summary << "  [FAIL: below the 90% bar]";
      pathwise_all_ok = false;
    }
    summary << "\n";
  }

  const L2Report l2 =
      l2_slope(ensemble, which, cfg.eta, cfg.tail_lo, tail_hi, mu_alpha);
  summary << "l2 fit over [" << l2.n_lo << ", " << tail_hi << "]: slope "
          << l2.fit.slope << " +/- " << l2.fit.stderr_ << " (target "
          << l2.target_slope << ", " << l2.n_seeds << " seeds"
          << (l2.log_corrected ? ", log-corrected" : "") << ")\n";

  std::ostringstream csv;
  csv << "n,mean_sq_err\n";
  for (std::size_t i = 0; i < l2.ns.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%ld,%.17g\n", l2.ns[i], l2.mean_sq[i]);
    csv << buf;
  }
  write_file(dir / "rates_l2.csv", csv.str());
  write_file(dir / "rates_summary.txt", summary.str());
  std::cout << summary.str();
  return pathwise_all_ok ? 0 : 1;
}

int cmd_all(const ExperimentConfig& cfg) {
  int worst = 0;
  for (int (*step)(const ExperimentConfig&) :
       {&cmd_verify, &cmd_run, &cmd_certify, &cmd_rates}) {
    const int rc = step(cfg);
    worst = std::max(worst, rc);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Contractive stochastic approximation under Markovian noise: "
      "simulation, drift certification, and convergence-rate experiments"};
  app.require_subcommand(1);
  app.footer("Thread count follows OMP_NUM_THREADS.");

  Overrides ov;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "JSON config file");
    sub->add_option("--out", ov.out_dir, "output directory root");
    sub->add_option("--seeds", ov.seeds, "seed range a..b");
    sub->add_option("--steps", ov.steps, "run horizon override");
    sub->add_option("--zeta", ov.zetas, "comma-separated zeta list");
  };

  bool print_defaults = false;
  CLI::App* config_cmd =
      app.add_subcommand("config", "inspect configuration");
  config_cmd->add_flag("--print-defaults", print_defaults,
                       "print the default config as JSON");

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run the envelope/poisson/contraction property suites");
  CLI::App* run_cmd =
      app.add_subcommand("run", "simulate the seed ensemble, write CSVs");
  CLI::App* certify_cmd = app.add_subcommand(
      "certify", "certify the drift inequalities along a trajectory");
  CLI::App* rates_cmd = app.add_subcommand(
      "rates", "pathwise and mean-square convergence-rate reports");
  CLI::App* all_cmd = app.add_subcommand("all", "verify, run, certify, rates");
  for (CLI::App* sub : {verify_cmd, run_cmd, certify_cmd, rates_cmd, all_cmd})
    add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_cmd->parsed()) {
      if (print_defaults)
        std::cout << config_to_json(default_config()).dump(2) << "\n";
      else
        std::cout << "use --print-defaults to dump the default config\n";
      return 0;
    }
    const ExperimentConfig cfg = resolve_config(ov);
    if (verify_cmd->parsed()) return cmd_verify(cfg);
    if (run_cmd->parsed()) return cmd_run(cfg);
    if (certify_cmd->parsed()) return cmd_certify(cfg);
    if (rates_cmd->parsed()) return cmd_rates(cfg);
    if (all_cmd->parsed()) return cmd_all(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const StructureError& e) {
    std::cerr << "structure error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
