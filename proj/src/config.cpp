#include "switchcert/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "switchcert/errors.hpp"
#include "switchcert/keyvalue.hpp"

namespace switchcert {

double ClassKInftyParams::alpha1(double s) const { return k1 * std::pow(s, gamma1); }
double ClassKInftyParams::alpha2(double s) const { return k2 * std::pow(s, gamma2); }
double ClassKInftyParams::sigma(double s) const { return kw * std::pow(s, gammaw); }

void ClassKInftyParams::validate() const {
  if (!(k1 > 0.0)) throw ValidationError("k1 must be positive");
  if (!(k2 > 0.0)) throw ValidationError("k2 must be positive");
  if (!(kw > 0.0)) throw ValidationError("kw must be positive");
  if (!(gamma1 >= 1.0)) throw ValidationError("gamma1 must be >= 1");
  if (!(gamma2 >= 1.0)) throw ValidationError("gamma2 must be >= 1");
  if (!(gammaw >= 1.0)) throw ValidationError("gammaw must be >= 1");
  if (!(k1 < k2)) throw ValidationError("k1 must be smaller than k2 (k1 >= k2 is infeasible)");
}

std::size_t SwitchedSystemSpec::mode_index(int mode_id) const {
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i] == mode_id) return i;
  }
  throw ValidationError("unknown mode " + std::to_string(mode_id));
}

void SwitchedSystemSpec::validate() const {
  if (modes.empty()) throw ValidationError("system: at least one mode is required");
  if (n <= 0 || m <= 0 || r <= 0) throw ValidationError("system: dimensions must be positive");
  if (state_box.dim() != n) throw ValidationError("system: state box dimension differs from n");
  if (dist_box.dim() != r) throw ValidationError("system: disturbance box dimension differs from r");
  if (input_box && input_box->dim() != m) {
    throw ValidationError("system: input box dimension differs from m");
  }
  if (reference.size() != n || !state_box.contains(reference)) {
    throw ValidationError("system: reference point must lie in the state box");
  }
  if (constants.size() != modes.size()) {
    throw ValidationError("system: per-mode constants must have one entry per mode");
  }
  for (std::size_t p = 0; p < constants.size(); ++p) {
    const auto& c = constants[p];
    const std::string tag = " (mode " + std::to_string(modes[p]) + ")";
    if (!(c.lip_x > 0.0)) throw ValidationError("L_x must be positive" + tag);
    if (!(c.lip_u > 0.0)) throw ValidationError("L_u must be positive" + tag);
    if (!(c.lip_w >= 0.0)) throw ValidationError("L_w must be non-negative" + tag);
    if (!(c.bound_f > 0.0)) throw ValidationError("M_f must be positive" + tag);
  }
}

std::string to_string(SwitchPolicy p) {
  return p == SwitchPolicy::RoundRobin ? "round-robin" : "seeded-random";
}

std::string to_string(DisturbancePolicy p) {
  switch (p) {
    case DisturbancePolicy::Zero: return "zero";
    case DisturbancePolicy::Constant: return "constant";
    case DisturbancePolicy::PiecewiseConstant: return "piecewise";
  }
  return "zero";
}

SwitchPolicy switch_policy_from_string(const std::string& s) {
  if (s == "round-robin") return SwitchPolicy::RoundRobin;
  if (s == "seeded-random" || s == "random") return SwitchPolicy::SeededRandom;
  throw ConfigError("unknown switch policy '" + s + "'");
}

DisturbancePolicy disturbance_policy_from_string(const std::string& s) {
  if (s == "zero") return DisturbancePolicy::Zero;
  if (s == "constant") return DisturbancePolicy::Constant;
  if (s == "piecewise" || s == "piecewise-constant") return DisturbancePolicy::PiecewiseConstant;
  throw ConfigError("unknown disturbance policy '" + s + "'");
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> to_ints(const std::vector<double>& v, const std::string& what) {
  std::vector<int> out;
  for (double d : v) {
    if (d != std::floor(d) || d <= 0) throw ConfigError("config: " + what + " must list positive integers");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

CompactBox read_box(const KeyValueDocument& doc, const std::string& lo, const std::string& hi) {
  try {
    return CompactBox(to_vec(doc.get_list("system", lo)), to_vec(doc.get_list("system", hi)));
  } catch (const ValidationError& e) {
    throw ValidationError("[system] " + lo + "/" + hi + ": " + e.what());
  }
}

}  // namespace

Config parse_config(const std::string& text) {
  const KeyValueDocument doc = KeyValueDocument::parse(text);
  Config cfg;
  cfg.hash = content_hash(text);

  // [system]
  auto& sys = cfg.system;
  auto& model = cfg.model;
  const std::string kind = doc.get_string("system", "kind");
  if (kind == "lotka_volterra") {
    model.kind = SystemKind::LotkaVolterra;
  } else if (kind == "linear") {
    model.kind = SystemKind::Linear;
  } else if (kind == "external") {
    model.kind = SystemKind::External;
  } else {
    throw ConfigError("config: [system] kind must be lotka_volterra, linear or external");
  }
  const long long l = doc.get_int("system", "modes");
  if (l < 1) throw ValidationError("[system] modes must be at least 1");
  for (int p = 1; p <= l; ++p) sys.modes.push_back(p);

  sys.state_box = read_box(doc, "state_lo", "state_hi");
  sys.dist_box = read_box(doc, "dist_lo", "dist_hi");
  if (doc.has("system", "input_lo") || doc.has("system", "input_hi")) {
    sys.input_box = read_box(doc, "input_lo", "input_hi");
  }
  sys.n = sys.state_box.dim();
  sys.r = sys.dist_box.dim();
  model.max_substep = doc.get_double("system", "max_substep", model.max_substep);
  model.timeout_seconds = doc.get_double("system", "timeout", model.timeout_seconds);
  if (!(model.max_substep > 0.0)) throw ValidationError("[system] max_substep must be positive");

  switch (model.kind) {
    case SystemKind::LotkaVolterra: {
      if (sys.n != 2) throw ValidationError("[system] lotka_volterra needs a 2-D state box");
      if (l != 2) throw ValidationError("[system] lotka_volterra has exactly 2 modes");
      const auto p = doc.get_list("system", "lv_params", {1.0, 1.0, 1.0, 1.0});
      if (p.size() != 4) throw ValidationError("[system] lv_params needs a, b, c, d");
      for (int i = 0; i < 4; ++i) {
        if (!(p[i] > 0.0)) throw ValidationError("[system] lv_params must be positive");
        model.lotka_volterra[i] = p[i];
      }
      sys.m = 1;
      sys.reference = Vec(2);
      sys.reference << p[2] / p[3], p[0] / p[1];
      break;
    }
    case SystemKind::Linear: {
      sys.m = sys.n;
      if (sys.r != sys.n) throw ValidationError("[system] linear systems need r = n");
      sys.reference = Vec::Zero(sys.n);
      for (int p = 1; p <= l; ++p) {
        const std::string sec = "modes." + std::to_string(p);
        const Vec drift = to_vec(doc.get_list(sec, "drift"));
        if (drift.size() != sys.n) throw ValidationError("[" + sec + "] drift must have length n");
        model.linear_drift.push_back(drift);
      }
      break;
    }
    case SystemKind::External: {
      model.command = doc.get_string("system", "command");
      sys.m = doc.get_int("system", "m");
      break;
    }
  }
  if (doc.has("system", "m") && doc.get_int("system", "m") != sys.m) {
    throw ValidationError("[system] m is inconsistent with the system kind");
  }
  if (doc.has("system", "reference")) {
    sys.reference = to_vec(doc.get_list("system", "reference"));
  } else if (model.kind == SystemKind::External) {
    throw ConfigError("config: missing key [system] reference");
  }

  // [certificate]
  auto& cert = cfg.certificate;
  const double g1 = doc.get_double("certificate", "gamma1", 2.0);
  const double g2 = doc.get_double("certificate", "gamma2", 2.0);
  const double gw = doc.get_double("certificate", "gammaw", 2.0);
  cert.eps_x = doc.get_double("certificate", "eps_x", cert.eps_x);
  cert.eps_u = doc.get_double("certificate", "eps_u", cert.eps_u);
  cert.tau = doc.get_double("certificate", "tau", cert.tau);
  cert.lie_substeps = static_cast<int>(doc.get_int("certificate", "lie_substeps", cert.lie_substeps));
  cert.target_lyapunov = doc.get_double("certificate", "L_L", cert.target_lyapunov);
  cert.target_lyapunov_jacobian = doc.get_double("certificate", "L_dL", cert.target_lyapunov_jacobian);
  cert.target_controller = doc.get_double("certificate", "L_C", cert.target_controller);
  cert.exclusion_radius = doc.get_double("certificate", "exclusion_radius", cert.exclusion_radius);
  cert.shared_v = doc.get_bool("certificate", "shared_v", cert.shared_v);
  if (doc.has("certificate", "lyapunov_hidden")) {
    cert.lyapunov_hidden = to_ints(doc.get_list("certificate", "lyapunov_hidden"), "lyapunov_hidden");
  }
  if (doc.has("certificate", "controller_hidden")) {
    cert.controller_hidden =
        to_ints(doc.get_list("certificate", "controller_hidden"), "controller_hidden");
  }
  cert.lyapunov_activation =
      activation_from_string(doc.get_string("certificate", "lyapunov_activation", "tanh"));
  cert.max_samples = static_cast<std::size_t>(
      doc.get_int("certificate", "max_samples", static_cast<long long>(cert.max_samples)));
  cert.zeta_grid = static_cast<int>(doc.get_int("certificate", "zeta_grid", cert.zeta_grid));
  cert.zero_tolerance = doc.get_double("certificate", "zero_tolerance", cert.zero_tolerance);

  if (!(cert.eps_x > 0.0) || !(cert.eps_u > 0.0)) throw ValidationError("[certificate] eps_x/eps_u must be positive");
  if (!(cert.tau > 0.0)) throw ValidationError("[certificate] tau must be positive");
  if (cert.lie_substeps < 1) throw ValidationError("[certificate] lie_substeps must be >= 1");
  if (!(cert.target_lyapunov > 0.0) || !(cert.target_lyapunov_jacobian > 0.0) ||
      !(cert.target_controller > 0.0)) {
    throw ValidationError("[certificate] Lipschitz targets L_L, L_dL, L_C must be positive");
  }
  if (!(cert.exclusion_radius >= 0.0)) throw ValidationError("[certificate] exclusion_radius must be >= 0");
  if (cert.zeta_grid < 2) throw ValidationError("[certificate] zeta_grid must be >= 2");

  // [modes.N]
  for (int p = 1; p <= l; ++p) {
    const std::string sec = "modes." + std::to_string(p);
    ModeConstants c;
    c.lip_x = doc.get_double(sec, "L_x");
    c.lip_u = doc.get_double(sec, "L_u");
    c.lip_w = doc.get_double(sec, "L_w", model.kind == SystemKind::Linear ? 1.0 : 0.0);
    c.bound_f = doc.get_double(sec, "M_f");
    sys.constants.push_back(c);

    ModeCertificateParams mp;
    mp.k.k1 = doc.get_double(sec, "k1");
    mp.k.k2 = doc.get_double(sec, "k2");
    mp.k.kw = doc.get_double(sec, "kw");
    mp.k.gamma1 = g1;
    mp.k.gamma2 = g2;
    mp.k.gammaw = gw;
    mp.kappa = doc.get_double(sec, "kappa");
    mp.mu = doc.get_double(sec, "mu");
    try {
      mp.k.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("[" + sec + "] " + e.what());
    }
    if (!(mp.kappa > 0.0)) throw ValidationError("[" + sec + "] kappa must be positive");
    if (!(mp.mu > 0.0)) throw ValidationError("[" + sec + "] mu must be positive");
    cert.per_mode.push_back(mp);
  }
  sys.validate();

  // [training]
  auto& tr = cfg.training;
  const auto c = doc.get_list("training", "c", {1, 1, 1, 1, 1});
  if (c.size() != 5) throw ValidationError("[training] c needs five loss weights");
  for (int i = 0; i < 5; ++i) tr.loss_weights[i] = c[i];
  const auto cl = doc.get_list("training", "c_lip", {1, 1, 1});
  if (cl.size() != 3) throw ValidationError("[training] c_lip needs three penalty weights");
  for (int i = 0; i < 3; ++i) tr.lipschitz_weights[i] = cl[i];
  for (double w : tr.loss_weights) if (!(w > 0.0)) throw ValidationError("[training] loss weights must be positive");
  for (double w : tr.lipschitz_weights) if (!(w > 0.0)) throw ValidationError("[training] c_lip weights must be positive");
  tr.learning_rate = doc.get_double("training", "learning_rate", tr.learning_rate);
  tr.beta1 = doc.get_double("training", "beta1", tr.beta1);
  tr.beta2 = doc.get_double("training", "beta2", tr.beta2);
  tr.adam_epsilon = doc.get_double("training", "adam_epsilon", tr.adam_epsilon);
  tr.lr_decay = doc.get_double("training", "lr_decay", tr.lr_decay);
  tr.batch_size = static_cast<std::size_t>(doc.get_int("training", "batch_size", 256));
  tr.max_epochs = static_cast<int>(doc.get_int("training", "max_epochs", tr.max_epochs));
  tr.seed = static_cast<std::uint64_t>(doc.get_int("training", "seed", 0));
  tr.residual_tolerance = doc.get_double("training", "residual_tolerance", tr.residual_tolerance);
  tr.fd_step = doc.get_double("training", "fd_step", tr.fd_step);
  tr.hinge_margin = doc.get_double("training", "hinge_margin", tr.hinge_margin);
  if (!(tr.learning_rate > 0.0)) throw ValidationError("[training] learning_rate must be positive");
  if (tr.batch_size == 0) throw ValidationError("[training] batch_size must be positive");
  if (tr.max_epochs < 0) throw ValidationError("[training] max_epochs must be >= 0");
  if (!(tr.fd_step > 0.0)) throw ValidationError("[training] fd_step must be positive");
  if (tr.hinge_margin < 0.0) throw ValidationError("[training] hinge_margin must be >= 0");

  // [simulation]
  auto& sim = cfg.simulation;
  sim.dt = doc.get_double("simulation", "dt", sim.dt);
  sim.horizon = doc.get_double("simulation", "horizon", sim.horizon);
  sim.x0 = doc.has("simulation", "x0") ? to_vec(doc.get_list("simulation", "x0")) : sys.state_box.center();
  sim.tau_d = doc.get_double("simulation", "tau_d", sim.tau_d);
  sim.switch_policy = switch_policy_from_string(doc.get_string("simulation", "switch_policy", "round-robin"));
  sim.disturbance_policy =
      disturbance_policy_from_string(doc.get_string("simulation", "disturbance_policy", "piecewise"));
  sim.disturbance_hold = doc.get_double("simulation", "disturbance_hold", sim.disturbance_hold);
  sim.disturbance_value = doc.has("simulation", "disturbance_value")
                              ? to_vec(doc.get_list("simulation", "disturbance_value"))
                              : sys.dist_box.hi();
  sim.seed = static_cast<std::uint64_t>(doc.get_int("simulation", "seed", 0));
  if (!(sim.dt > 0.0)) throw ValidationError("[simulation] dt must be positive");
  if (!(sim.horizon > 0.0)) throw ValidationError("[simulation] horizon must be positive");
  if (sim.x0.size() != sys.n) throw ValidationError("[simulation] x0 must have length n");
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace switchcert
