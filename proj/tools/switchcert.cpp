// Command-line front end: cover, train, verify, dwell, simulate.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "switchcert/certify.hpp"
#include "switchcert/checkpoint.hpp"
#include "switchcert/config.hpp"
#include "switchcert/cover.hpp"
#include "switchcert/errors.hpp"
#include "switchcert/flow.hpp"
#include "switchcert/sim.hpp"
#include "switchcert/train.hpp"

namespace fs = std::filesystem;
using namespace switchcert;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kArgumentError = 2;
constexpr int kResourceError = 3;

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string started;

  void write(const fs::path& out, const std::string& name) {
    artifacts.push_back(name);
    nlohmann::json j;
    j["tool"] = "switchcert";
    j["version"] = kVersion;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = now();
    j["artifacts"] = artifacts;
    std::ofstream f(out / name);
    f << j.dump(2) << '\n';
  }

  static std::string now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
}

std::vector<double> parse_csv_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    out.push_back(v);
  }
  return out;
}

fs::path checkpoint_file(const fs::path& p) { return fs::is_directory(p) ? p / "bundle.json" : p; }

// Builds or loads the sample cover for a config.
SampleSet make_samples(const Config& cfg, double refine = 1.0) {
  return cover_product(cfg.system, cfg.certificate.eps_x / refine, cfg.certificate.eps_u / refine,
                       cfg.certificate.max_samples);
}

FlowFactory factory(const Config& cfg) {
  return [cfg] { return make_flow(cfg); };
}

std::string fmt(double v) { return format_double(v); }

int cmd_cover(const fs::path& out, const std::string& config_path, Manifest& man) {
  const Config cfg = load_config(config_path);
  man.config_hash = cfg.hash;
  const SampleSet samples = make_samples(cfg);
  std::mt19937_64 rng(cfg.training.seed);
  const CertificateBundle bundle = initialize_bundle(cfg, rng);
  const ValidityMargins margins = compute_margins(cfg.system, bundle, cfg.certificate, samples);
  save_sample_set(samples, (out / "samples.txt").string());
  man.artifacts.push_back("samples.txt");
  std::cout << "N=" << samples.states.size() << " M=" << samples.disturbances.size()
            << " eps=" << fmt(samples.eps) << " eta_hat=" << fmt(margins.eta_hat) << '\n';
  man.write(out, "manifest_cover.json");
  return 0;
}

int cmd_train(const fs::path& out, const std::string& config_path, int mode_id, bool shared,
              Manifest& man) {
  Config cfg = load_config(config_path);
  man.config_hash = cfg.hash;
  man.seed = cfg.training.seed;
  if (shared) cfg.certificate.shared_v = true;
  if (mode_id != 0) {
    if (cfg.certificate.shared_v) {
      std::cerr << "error: --mode cannot be combined with a shared Lyapunov network\n";
      return kArgumentError;
    }
    if (mode_id < 1 || static_cast<std::size_t>(mode_id) > cfg.system.mode_count()) {
      std::cerr << "error: --mode " << mode_id << " is not a mode of this system (1.."
                << cfg.system.mode_count() << ")\n";
      return kArgumentError;
    }
  }
  const SampleSet samples = make_samples(cfg);
  std::cout << "cover: N=" << samples.states.size() << " M=" << samples.disturbances.size()
            << " eps=" << fmt(samples.eps) << '\n';

  TrainAllResult res;
  if (mode_id != 0) {
    std::mt19937_64 rng(cfg.training.seed);
    res.bundle = initialize_bundle(cfg, rng);
    res.margins = compute_margins(cfg.system, res.bundle, cfg.certificate, samples);
    auto flow = make_flow(cfg);
    const std::size_t p = cfg.system.mode_index(mode_id);
    res.runs.push_back(train_mode(*flow, cfg.system, res.bundle, p, samples, res.margins, cfg));
    res.status = res.runs.back().status;
    res.report = verify_full(*flow, cfg.system, res.bundle, res.margins, samples,
                             cfg.certificate.zero_tolerance, cfg.certificate.lie_substeps);
    res.report.notes.push_back("only mode " + std::to_string(mode_id) + " was trained");
  } else {
    res = train_all(factory(cfg), cfg, samples);
  }

  for (const TrainResult& r : res.runs) {
    std::string name = "train_log_shared.csv";
    if (!res.bundle.shared_v) name = "train_log_mode" + std::to_string(cfg.system.modes[r.modes.front()]) + ".csv";
    write_training_log(r, (out / name).string());
    man.artifacts.push_back(name);
    std::cout << (res.bundle.shared_v ? std::string("shared") : "mode " + std::to_string(cfg.system.modes[r.modes.front()]))
              << ": " << to_string(r.status) << " after " << r.epochs_run
              << " epochs, worst slack " << fmt(r.log.empty() ? 0.0 : r.log.back().worst_slack);
    if (!r.message.empty()) std::cout << " (" << r.message << ")";
    std::cout << '\n';
  }
  save_bundle(res.bundle, (out / "bundle.json").string());
  man.artifacts.push_back("bundle.json");
  write_json(out / "report.json", report_to_json(res.report, res.margins, cfg.system));
  man.artifacts.push_back("report.json");

  std::cout << "eta_hat=" << fmt(res.report.eta_hat) << " pass=" << (res.report.pass ? "true" : "false");
  if (res.report.zeta) std::cout << " zeta=" << fmt(*res.report.zeta);
  std::cout << " kappa=" << fmt(res.report.kappa_min);
  if (res.report.tau_d_min) std::cout << " tau_d_min=" << fmt(*res.report.tau_d_min);
  std::cout << "\nstatus: " << to_string(res.status) << '\n';
  man.write(out, "manifest_train.json");
  return exit_code(res.status);
}

int cmd_verify(const fs::path& out, const std::string& config_path, const fs::path& ckpt,
               int refine, bool ignore_hash, Manifest& man) {
  const Config cfg = load_config(config_path);
  man.config_hash = cfg.hash;
  CertificateBundle bundle;
  try {
    bundle = load_bundle(checkpoint_file(ckpt).string());
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kArgumentError;
  }
  if (bundle.config_hash != cfg.hash && !ignore_hash) {
    std::cerr << "error: checkpoint config hash " << bundle.config_hash << " does not match "
              << cfg.hash << " (use --ignore-hash to override)\n";
    return kArgumentError;
  }
  if (bundle.mode_count() != cfg.system.mode_count()) {
    std::cerr << "error: checkpoint has " << bundle.mode_count() << " modes, config has "
              << cfg.system.mode_count() << '\n';
    return kArgumentError;
  }
  const SampleSet samples = make_samples(cfg, static_cast<double>(refine));
  const ValidityMargins margins = compute_margins(cfg.system, bundle, cfg.certificate, samples);
  auto flow = make_flow(cfg);
  VerificationReport report = verify_full(*flow, cfg.system, bundle, margins, samples,
                                          cfg.certificate.zero_tolerance, cfg.certificate.lie_substeps);
  attach_dwell(report, bundle, uniform_grid(cfg.system.state_box, cfg.certificate.zeta_grid),
               margins.exclusion_radius + margins.eps);
  if (refine > 1) report.notes.push_back("refined cover: eps divided by " + std::to_string(refine));
  const std::string name = refine > 1 ? "verify_refine" + std::to_string(refine) + ".json" : "verify.json";
  write_json(out / name, report_to_json(report, margins, cfg.system));
  man.artifacts.push_back(name);

  static const char* names[4] = {"lower_bound", "upper_bound", "decrease", "barrier"};
  std::cout << "eps=" << fmt(report.eps) << " eta_hat=" << fmt(report.eta_hat) << '\n';
  for (const ModeReport& m : report.modes) {
    std::cout << "mode " << m.mode_id << (m.pass ? " pass" : " FAIL") << " |V(x*)|=" << fmt(std::abs(m.reference_value))
              << " lipschitz_ok=" << (m.lipschitz_ok ? "true" : "false") << '\n';
    for (int i = 0; i < 4; ++i) {
      const ConditionWorst& c = m.conditions[i];
      if (!c.evaluated) continue;
      std::cout << "  " << names[i] << ": worst " << fmt(c.value) << " slack " << fmt(c.value - report.eta_hat)
                << " at x=[";
      for (Eigen::Index k = 0; k < c.x.size(); ++k) std::cout << (k ? "," : "") << fmt(c.x[k]);
      std::cout << "]\n";
    }
  }
  if (report.zeta) std::cout << "zeta=" << fmt(*report.zeta);
  std::cout << " kappa=" << fmt(report.kappa_min);
  if (report.tau_d_min) std::cout << " tau_d_min=" << fmt(*report.tau_d_min);
  std::cout << "\npass=" << (report.pass ? "true" : "false") << '\n';
  man.write(out, "manifest_verify.json");
  return report.pass ? 0 : 1;
}

int cmd_dwell(const fs::path& out, const std::string& config_path, const fs::path& ckpt, int grid,
              double zeta_fixture, double kappa_fixture, Manifest& man) {
  if (zeta_fixture > 0.0 || kappa_fixture > 0.0) {
    if (!(zeta_fixture > 0.0) || !(kappa_fixture > 0.0)) {
      std::cerr << "error: --zeta and --kappa must be given together\n";
      return kArgumentError;
    }
    const double bound = dwell_time_min(zeta_fixture, kappa_fixture);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", bound);
    std::cout << "zeta=" << fmt(zeta_fixture) << " kappa=" << fmt(kappa_fixture) << " tau_d_min=" << buf
              << " (" << fmt(bound) << ")\n";
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "error: dwell needs --config and --checkpoint, or --zeta and --kappa\n";
    return kArgumentError;
  }
  const Config cfg = load_config(config_path);
  man.config_hash = cfg.hash;
  CertificateBundle bundle;
  try {
    bundle = load_bundle(checkpoint_file(ckpt).string());
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kArgumentError;
  }
  VerificationReport report;
  const int points = grid > 0 ? grid : cfg.certificate.zeta_grid;
  const double excl = cfg.certificate.exclusion_radius + std::max(cfg.certificate.eps_x, cfg.certificate.eps_u);
  attach_dwell(report, bundle, uniform_grid(cfg.system.state_box, points), excl);
  nlohmann::json j;
  j["zeta"] = report.zeta ? nlohmann::json(*report.zeta) : nlohmann::json(nullptr);
  j["kappa"] = report.kappa_min;
  j["tau_d_min"] = report.tau_d_min ? nlohmann::json(*report.tau_d_min) : nlohmann::json(nullptr);
  j["excluded_points"] = report.zeta_excluded;
  j["notes"] = report.notes;
  write_json(out / "dwell.json", j);
  man.artifacts.push_back("dwell.json");
  if (report.zeta) std::cout << "zeta=" << fmt(*report.zeta) << ' ';
  std::cout << "kappa=" << fmt(report.kappa_min);
  if (report.tau_d_min) std::cout << " tau_d_min=" << fmt(*report.tau_d_min);
  std::cout << '\n';
  for (const auto& n : report.notes) std::cout << "note: " << n << '\n';
  man.write(out, "manifest_dwell.json");
  return report.zeta ? 0 : 1;
}

struct SimulateArgs {
  std::string x0;
  double tau_d = -1.0;
  double horizon = -1.0;
  double dt = -1.0;
  std::string switch_policy;
  std::string dist_policy;
  long long seed = -1;
};

int cmd_simulate(const fs::path& out, const std::string& config_path, const fs::path& ckpt,
                 const SimulateArgs& a, bool dt_given, Manifest& man) {
  const Config cfg = load_config(config_path);
  man.config_hash = cfg.hash;
  SimulationConfig sc = cfg.simulation;
  if (!a.x0.empty()) {
    try {
      const auto v = parse_csv_numbers(a.x0);
      sc.x0 = Vec::Map(v.data(), static_cast<Eigen::Index>(v.size()));
    } catch (const std::exception&) {
      std::cerr << "error: --x0 must be a comma-separated list of numbers\n";
      return kArgumentError;
    }
  }
  if (a.tau_d >= 0.0) sc.tau_d = a.tau_d;
  if (a.horizon >= 0.0) sc.horizon = a.horizon;
  if (dt_given) sc.dt = a.dt;
  if (!a.switch_policy.empty()) sc.switch_policy = switch_policy_from_string(a.switch_policy);
  if (!a.dist_policy.empty()) sc.disturbance_policy = disturbance_policy_from_string(a.dist_policy);
  if (a.seed >= 0) sc.seed = static_cast<std::uint64_t>(a.seed);
  man.seed = sc.seed;
  if (!(sc.dt > 0.0)) {
    std::cerr << "error: --dt must be positive\n";
    return kArgumentError;
  }
  if (!(sc.tau_d > 0.0) || !(sc.horizon > 0.0)) {
    std::cerr << "error: --tau-d and --horizon must be positive\n";
    return kArgumentError;
  }
  if (sc.x0.size() != cfg.system.n || !cfg.system.state_box.contains(sc.x0)) {
    std::cerr << "error: --x0 must be a point of the state box\n";
    return kArgumentError;
  }
  CertificateBundle bundle;
  try {
    bundle = load_bundle(checkpoint_file(ckpt).string());
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kArgumentError;
  }

  VerificationReport dwell;
  const double excl = cfg.certificate.exclusion_radius + std::max(cfg.certificate.eps_x, cfg.certificate.eps_u);
  attach_dwell(dwell, bundle, uniform_grid(cfg.system.state_box, cfg.certificate.zeta_grid), excl);
  if (dwell.tau_d_min && sc.tau_d <= *dwell.tau_d_min) {
    std::cerr << "warning: tau_d " << fmt(sc.tau_d) << " does not exceed the dwell bound "
              << fmt(*dwell.tau_d_min) << "; the ISS guarantee does not apply\n";
  }

  auto flow = make_flow(cfg);
  const SwitchingSignal sw = gen_switching(sc.tau_d, sc.horizon, bundle.mode_count(), sc.switch_policy, sc.seed);
  const DisturbanceSignal dist = gen_disturbance(cfg.system.dist_box, sc.horizon, sc.disturbance_policy,
                                                 sc.disturbance_hold, sc.disturbance_value, sc.seed);
  const Trajectory traj = simulate_closed_loop(*flow, cfg.system, bundle, sc.x0, sw, dist, sc.horizon, sc.dt);

  std::optional<IssMonitor> mon;
  if (dwell.zeta) {
    try {
      mon = monitor_iss_bound(traj, bundle, *dwell.zeta, dwell.kappa_min, sc.tau_d);
    } catch (const ValidationError& e) {
      std::cerr << "warning: ISS monitor skipped: " << e.what() << '\n';
    }
  }
  write_trajectory_csv(traj, cfg.system, mon ? &*mon : nullptr, (out / "trajectory.csv").string());
  man.artifacts.push_back("trajectory.csv");

  double worst_jump = 0.0;
  for (const SwitchEvent& ev : traj.switches) {
    if (ev.v_before > 0.0) worst_jump = std::max(worst_jump, ev.v_after / ev.v_before);
  }
  nlohmann::json j;
  j["steps"] = traj.size();
  j["switches"] = traj.switches.size();
  j["safe"] = traj.all_safe();
  j["aborted"] = traj.aborted;
  j["abort_reason"] = traj.abort_reason;
  j["zeta"] = dwell.zeta ? nlohmann::json(*dwell.zeta) : nlohmann::json(nullptr);
  j["kappa"] = dwell.kappa_min;
  j["tau_d"] = sc.tau_d;
  j["tau_d_min"] = dwell.tau_d_min ? nlohmann::json(*dwell.tau_d_min) : nlohmann::json(nullptr);
  j["max_switch_ratio"] = worst_jump;
  if (mon) {
    j["monitor"] = {{"all_ok", mon->all_ok}, {"min_margin", mon->min_margin}, {"lambda", mon->lambda},
                    {"gamma0", mon->gamma0}, {"rho", mon->rho}, {"w_norm", mon->w_norm}};
  }
  write_json(out / "simulation.json", j);
  man.artifacts.push_back("simulation.json");

  std::cout << "steps=" << traj.size() << " switches=" << traj.switches.size()
            << " safe=" << (traj.all_safe() ? "true" : "false");
  if (mon) std::cout << " iss_ok=" << (mon->all_ok ? "true" : "false") << " min_margin=" << fmt(mon->min_margin);
  std::cout << " max_switch_ratio=" << fmt(worst_jump) << '\n';
  if (traj.aborted) std::cout << "aborted: " << traj.abort_reason << '\n';
  man.write(out, "manifest_simulate.json");
  return traj.aborted ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and verify ISS certificates for switched systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string out_dir = ".";
  app.add_option("--out", out_dir, "Directory for all emitted artifacts");

  std::string config;
  std::string checkpoint;

  auto* cover = app.add_subcommand("cover", "Build the sample cover and preview the margin");
  cover->add_option("--config", config, "Configuration file")->required();

  int mode_id = 0;
  bool all = false;
  bool shared = false;
  auto* train = app.add_subcommand("train", "Train certificates");
  train->add_option("--config", config, "Configuration file")->required();
  auto* mode_opt = train->add_option("--mode", mode_id, "Train a single mode (1-based)");
  auto* all_opt = train->add_flag("--all", all, "Train every mode");
  auto* shared_opt = train->add_flag("--shared-v", shared, "Train one Lyapunov network for all modes");
  mode_opt->excludes(all_opt)->excludes(shared_opt);

  int refine = 1;
  bool ignore_hash = false;
  auto* verify = app.add_subcommand("verify", "Verify a checkpoint on the cover");
  verify->add_option("--config", config, "Configuration file")->required();
  verify->add_option("--checkpoint", checkpoint, "Checkpoint file or directory (default: --out)");
  verify->add_option("--refine", refine, "Verify on a k-times finer cover")->check(CLI::PositiveNumber);
  verify->add_flag("--ignore-hash", ignore_hash, "Accept a checkpoint trained on a different config");

  int grid = 0;
  double zeta = 0.0;
  double kappa = 0.0;
  auto* dwell = app.add_subcommand("dwell", "Comparison constant and dwell-time bound");
  dwell->add_option("--config", config, "Configuration file");
  dwell->add_option("--checkpoint", checkpoint, "Checkpoint file or directory (default: --out)");
  dwell->add_option("--grid", grid, "Grid points per axis")->check(CLI::PositiveNumber);
  dwell->add_option("--zeta", zeta, "Use a given comparison constant");
  dwell->add_option("--kappa", kappa, "Use a given decay rate");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop rollout with ISS and safety monitors");
  simulate->add_option("--config", config, "Configuration file")->required();
  simulate->add_option("--checkpoint", checkpoint, "Checkpoint file or directory (default: --out)");
  simulate->add_option("--x0", sim.x0, "Initial state, comma separated");
  simulate->add_option("--tau-d", sim.tau_d, "Dwell time between switches");
  simulate->add_option("--horizon", sim.horizon, "Simulated time");
  auto* dt_opt = simulate->add_option("--dt", sim.dt, "Integration step");
  simulate->add_option("--switch-policy", sim.switch_policy, "round-robin or seeded-random");
  simulate->add_option("--dist-policy", sim.dist_policy, "zero, constant or piecewise");
  simulate->add_option("--seed", sim.seed, "Seed for random policies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kArgumentError;
  }

  const fs::path out(out_dir);
  const fs::path ckpt = checkpoint.empty() ? out : fs::path(checkpoint);
  Manifest man;
  man.started = Manifest::now();
  for (int i = 0; i < argc; ++i) man.command += (i ? " " : "") + std::string(argv[i]);

  try {
    fs::create_directories(out);
    if (*cover) return cmd_cover(out, config, man);
    if (*train) {
      if (!all && !shared && mode_id == 0) {
        std::cerr << "error: train needs one of --mode, --all, --shared-v\n";
        return kArgumentError;
      }
      return cmd_train(out, config, mode_id, shared, man);
    }
    if (*verify) return cmd_verify(out, config, ckpt, refine, ignore_hash, man);
    if (*dwell) return cmd_dwell(out, config, ckpt, grid, zeta, kappa, man);
    if (*simulate) return cmd_simulate(out, config, ckpt, sim, dt_opt->count() > 0, man);
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << " (required N=" << e.required() << ")\n";
    return kResourceError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kArgumentError;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kArgumentError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kArgumentError;
}
