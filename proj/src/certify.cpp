#include "switchcert/certify.hpp"

#include <algorithm>
#include <cmath>

#include "switchcert/errors.hpp"

namespace switchcert {

double class_k_eval(double k, double gamma, double s) {
  if (s < 0.0) throw ValidationError("class-K: negative magnitude");
  return k * std::pow(s, gamma);
}

double class_k_lipschitz(double k, double gamma, double radius) {
  return k * gamma * std::pow(radius, gamma - 1.0);
}

double lie_lipschitz_x(double m_l, double lip_x, double lip_u, double lip_c, double bound_f,
                       double lip_dl) {
  return m_l * (lip_x + lip_u * lip_c) + bound_f * lip_dl;
}

double lie_error_bound(double tau, double lie_lip, double bound_f) {
  return 0.5 * tau * lie_lip * bound_f;
}

LipschitzTargets LipschitzTargets::from(const CertificateConfig& cfg) {
  return {cfg.target_lyapunov, cfg.target_lyapunov_jacobian, cfg.target_controller};
}

ValidityMargins compute_margins(const SwitchedSystemSpec& spec,
                                const std::vector<ModeCertificateParams>& params,
                                const ProductBarrier& barrier, const LipschitzTargets& targets,
                                double eps, double tau, double exclusion_radius) {
  if (params.empty()) throw ValidationError("margins: no modes");
  if (params.size() != spec.constants.size()) {
    throw ValidationError("margins: mode parameters and plant constants differ in count");
  }
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("margins: ") + what + " must be positive");
    }
  };
  positive(eps, "eps");
  positive(tau, "tau");
  positive(targets.lyapunov, "Lyapunov Lipschitz target");
  positive(targets.lyapunov_jacobian, "Lyapunov Jacobian Lipschitz target");
  positive(targets.controller, "controller Lipschitz target");
  if (exclusion_radius < 0.0) throw ValidationError("margins: negative exclusion radius");

  const double radius = spec.state_box.max_distance_from(spec.reference);
  const double radius_w = spec.dist_box.max_distance_from(Vec::Zero(spec.r));
  const double m_l = targets.lyapunov;
  const double l_c = targets.controller;
  const double m_h = barrier.gradient_bound();
  const double l_h = barrier.lipschitz();
  const double l_dh = barrier.gradient_lipschitz();

  ValidityMargins out;
  out.tau = tau;
  out.eps = eps;
  out.exclusion_radius = exclusion_radius;
  out.targets = targets;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const ModeConstants& c = spec.constants[p];
    const ModeCertificateParams& mp = params[p];
    positive(c.lip_x, "L_x");
    positive(c.lip_u, "L_u");
    positive(c.bound_f, "M_f");
    positive(mp.kappa, "kappa");
    positive(mp.mu, "mu");
    if (c.lip_w < 0.0) throw ValidationError("margins: L_w must be non-negative");
    mp.k.validate();

    ModeMargins mm;
    mm.lip_alpha1 = class_k_lipschitz(mp.k.k1, mp.k.gamma1, radius);
    mm.lip_alpha2 = class_k_lipschitz(mp.k.k2, mp.k.gamma2, radius);
    mm.lip_sigma = class_k_lipschitz(mp.k.kw, mp.k.gammaw, radius_w);
    mm.lie_lip_x = lie_lipschitz_x(m_l, c.lip_x, c.lip_u, l_c, c.bound_f, targets.lyapunov_jacobian);
    mm.lie_lip_w = m_l * (c.lip_u * l_c + c.lip_w);
    mm.barrier_lie_lip_x = c.bound_f * l_dh + m_h * (c.lip_x + c.lip_u * l_c);
    mm.barrier_lie_lip_w = m_h * (c.lip_u * l_c + c.lip_w);
    mm.delta_v = lie_error_bound(tau, mm.lie_lip_x, c.bound_f);
    mm.delta_h = lie_error_bound(tau, mm.barrier_lie_lip_x, c.bound_f);
    mm.condition_lipschitz = {
        targets.lyapunov + mm.lip_alpha1,
        targets.lyapunov + mm.lip_alpha2,
        mp.kappa * targets.lyapunov + mm.lip_sigma + mm.lie_lip_x + mm.lie_lip_w,
        mm.barrier_lie_lip_x + mm.barrier_lie_lip_w + mp.mu * l_h,
    };
    mm.composite = *std::max_element(mm.condition_lipschitz.begin(), mm.condition_lipschitz.end());
    worst = std::max(worst, mm.composite);
    out.modes.push_back(mm);
  }
  out.eta_hat = -worst * eps;
  return out;
}

ValidityMargins compute_margins(const SwitchedSystemSpec& spec, const CertificateBundle& bundle,
                                const CertificateConfig& cfg, const SampleSet& samples) {
  return compute_margins(spec, bundle.params, bundle.barrier, LipschitzTargets::from(cfg),
                         samples.eps, cfg.tau, cfg.exclusion_radius);
}

LieSample lie_sample(const ClosedLoop& loop, std::size_t mode, const Vec& x, const Vec& w,
                     double tau, int substeps) {
  if (!(tau > 0.0)) throw ValidationError("lie: tau must be positive");
  if (substeps < 1) throw ValidationError("lie: substeps must be >= 1");
  const CertificateBundle& b = loop.bundle();
  const double h = tau / static_cast<double>(substeps);
  const CompactBox guard = b.barrier.box().inflated(1.5);
  LieSample s;
  Vec z = x;
  for (int i = 0; i < substeps; ++i) {
    z = loop.advance(mode, z, w, h);
    if (!guard.contains(z)) s.guard_exit = true;
  }
  s.lie_v = (b.lyapunov_value(mode, z) - b.lyapunov_value(mode, x)) / tau;
  s.lie_h = (b.barrier.value(z) - b.barrier.value(x)) / tau;
  s.end_state = std::move(z);
  return s;
}

double lie_estimate(const ClosedLoop& loop, std::size_t mode, const Vec& x, const Vec& w,
                    double tau, int substeps) {
  return lie_sample(loop, mode, x, w, tau, substeps).lie_v;
}

std::array<double, 4> check_point(const CertificateBundle& bundle, const ValidityMargins* margins,
                                  std::size_t mode, const Vec& x, const Vec& w, double lie_v,
                                  double lie_h) {
  const ModeCertificateParams& mp = bundle.params.at(mode);
  const double s = (x - bundle.reference).norm();
  const double v = bundle.lyapunov_value(mode, x);
  const double dv = margins ? margins->modes.at(mode).delta_v : 0.0;
  const double dh = margins ? margins->modes.at(mode).delta_h : 0.0;
  return {
      -v + mp.k.alpha1(s),
      v - mp.k.alpha2(s),
      lie_v + mp.kappa * v - mp.k.sigma(w.norm()) + dv,
      -lie_h - mp.mu * bundle.barrier.value(x) + dh,
  };
}

double ModeReport::worst_slack(double eta_hat) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : conditions) {
    if (c.evaluated) worst = std::max(worst, c.value - eta_hat);
  }
  return worst;
}

double VerificationReport::worst_slack() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& m : modes) worst = std::max(worst, m.worst_slack(eta_hat));
  return worst;
}

ModeReport evaluate_mode(const ClosedLoop& loop, const SwitchedSystemSpec& spec,
                         const ValidityMargins& margins, const SampleSet& samples,
                         std::size_t mode, double zero_tolerance, int lie_substeps) {
  const CertificateBundle& b = loop.bundle();
  const double eta = margins.eta_hat;
  ModeReport rep;
  rep.mode_id = spec.modes.at(mode);
  rep.reference_value = b.lyapunov_value(mode, b.reference);
  rep.zero_ok = std::abs(rep.reference_value) <= zero_tolerance;
  rep.sub_losses[0] = std::abs(rep.reference_value);

  auto update = [&](int c, double value, const Vec& x, const Vec& w) {
    ConditionWorst& cw = rep.conditions[c];
    if (!cw.evaluated || value > cw.value) {
      cw.value = value;
      cw.x = x;
      cw.w = w;
    }
    cw.evaluated = true;
    rep.sub_losses[c + 1] += std::max(0.0, value - eta);
  };

  for (const Vec& x : samples.states) {
    const bool active = (x - b.reference).norm() >= margins.exclusion_radius;
    bool first = true;
    for (const Vec& w : samples.disturbances) {
      const LieSample ls = lie_sample(loop, mode, x, w, margins.tau, lie_substeps);
      if (ls.guard_exit) ++rep.guard_exits;
      const auto c = check_point(b, &margins, mode, x, w, ls.lie_v, ls.lie_h);
      if (active) {
        if (first) {
          update(0, c[0], x, w);
          update(1, c[1], x, w);
        }
        update(2, c[2], x, w);
      }
      update(3, c[3], x, w);
      first = false;
    }
  }

  rep.lyapunov_cert = b.lyapunov_certificate(mode);
  rep.controller_cert = b.controller_certificate(mode);
  rep.lipschitz_ok = rep.lyapunov_cert.function_bound <= margins.targets.lyapunov &&
                     rep.lyapunov_cert.jacobian_bound <= margins.targets.lyapunov_jacobian &&
                     rep.controller_cert.function_bound <= margins.targets.controller;
  bool conditions_ok = true;
  for (const auto& cw : rep.conditions) {
    if (cw.evaluated && !(cw.value <= eta)) conditions_ok = false;
  }
  rep.pass = conditions_ok && rep.zero_ok && rep.lipschitz_ok;
  return rep;
}

VerificationReport verify_full(FlowMap& flow, const SwitchedSystemSpec& spec,
                               const CertificateBundle& bundle, const ValidityMargins& margins,
                               const SampleSet& samples, double zero_tolerance, int lie_substeps) {
  if (spec.mode_count() == 0 || bundle.mode_count() == 0) throw ValidationError("verify: empty mode list");
  bundle.validate();
  if (bundle.mode_count() != spec.mode_count() || margins.modes.size() != spec.mode_count()) {
    throw ValidationError("verify: bundle, margins and system disagree on the mode count");
  }
  if (samples.states.empty() || samples.disturbances.empty()) throw ValidationError("verify: empty sample set");

  const ClosedLoop loop(flow, bundle);
  VerificationReport report;
  report.eta_hat = margins.eta_hat;
  report.eps = margins.eps;
  report.tau = margins.tau;
  report.exclusion_radius = margins.exclusion_radius;
  report.kappa_min = bundle.kappa_min();
  report.config_hash = bundle.config_hash;
  report.pass = true;
  for (std::size_t p = 0; p < spec.mode_count(); ++p) {
    report.modes.push_back(evaluate_mode(loop, spec, margins, samples, p, zero_tolerance, lie_substeps));
    if (!report.modes.back().pass) report.pass = false;
    if (report.modes.back().guard_exits > 0) {
      report.notes.push_back("mode " + std::to_string(report.modes.back().mode_id) + ": " +
                             std::to_string(report.modes.back().guard_exits) +
                             " Lie samples left the guard box");
    }
  }
  if (margins.exclusion_radius > 0.0) {
    report.notes.push_back("decrease conditions certified outside the ball of radius " +
                           format_double(margins.exclusion_radius + margins.eps) + " around x*");
  }
  return report;
}

std::vector<Vec> uniform_grid(const CompactBox& box, int points_per_dim) {
  if (points_per_dim < 2) throw ValidationError("grid: need at least two points per axis");
  const Eigen::Index n = box.dim();
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= static_cast<std::size_t>(points_per_dim);
  std::vector<Vec> out;
  out.reserve(total);
  std::vector<int> idx(n, 0);
  for (std::size_t s = 0; s < total; ++s) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = static_cast<double>(idx[i]) / (points_per_dim - 1);
      x[i] = box.lo()[i] + a * (box.hi()[i] - box.lo()[i]);
    }
    out.push_back(std::move(x));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (++idx[i] < points_per_dim) break;
      idx[i] = 0;
    }
  }
  return out;
}

ZetaEstimate estimate_zeta(const CertificateBundle& bundle, const std::vector<Vec>& grid,
                           double exclusion_radius) {
  ZetaEstimate est;
  if (bundle.shared_v) return est;
  const std::size_t l = bundle.mode_count();
  if (l < 2) throw ValidationError("zeta: needs at least two modes");

  std::vector<std::vector<double>> values;
  std::vector<const Vec*> points;
  double top = 0.0;
  for (const Vec& x : grid) {
    if ((x - bundle.reference).norm() < exclusion_radius) {
      ++est.excluded;
      continue;
    }
    std::vector<double> v(l);
    for (std::size_t p = 0; p < l; ++p) {
      v[p] = bundle.lyapunov_value(p, x);
      top = std::max(top, v[p]);
    }
    values.push_back(std::move(v));
    points.push_back(&x);
  }
  const double floor = 1e-8 * top;
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto [lo, hi] = std::minmax_element(values[i].begin(), values[i].end());
    if (!(*lo >= floor) || !(*lo > 0.0)) {
      ++est.excluded;
      continue;
    }
    const double ratio = *hi / *lo;
    if (!any || ratio > est.zeta) {
      est.zeta = std::max(1.0, ratio);
      est.argmax = *points[i];
    }
    any = true;
  }
  if (!any) throw ValidationError("zeta: every grid point is below the positivity floor");
  return est;
}

void attach_dwell(VerificationReport& report, const CertificateBundle& bundle,
                  const std::vector<Vec>& grid, double exclusion_radius) {
  report.kappa_min = bundle.kappa_min();
  if (bundle.mode_count() < 2) {
    report.zeta = 1.0;
    report.tau_d_min = 0.0;
    report.notes.push_back("single mode: no switching, dwell bound 0");
    return;
  }
  if (bundle.shared_v) {
    report.zeta = 1.0;
    report.tau_d_min = 0.0;
    report.notes.push_back("common Lyapunov function: zeta = 1, arbitrary switching admissible");
    return;
  }
  try {
    const ZetaEstimate z = estimate_zeta(bundle, grid, exclusion_radius);
    report.zeta = z.zeta;
    report.zeta_excluded = z.excluded;
    report.tau_d_min = dwell_time_min(z.zeta, report.kappa_min);
  } catch (const ValidationError& e) {
    report.notes.push_back(e.what());
  }
}

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json report_to_json(const VerificationReport& report, const ValidityMargins& margins,
                              const SwitchedSystemSpec& spec) {
  static const char* names[4] = {"lower_bound", "upper_bound", "decrease", "barrier"};
  nlohmann::json j;
  j["pass"] = report.pass;
  j["config_hash"] = report.config_hash;
  j["eta_hat"] = report.eta_hat;
  j["eps"] = report.eps;
  j["tau"] = report.tau;
  j["exclusion_radius"] = report.exclusion_radius;
  j["zeta"] = optional_json(report.zeta);
  j["zeta_excluded_points"] = report.zeta_excluded;
  j["kappa_min"] = report.kappa_min;
  j["tau_d_min"] = optional_json(report.tau_d_min);
  j["worst_slack"] = report.worst_slack();
  j["notes"] = report.notes;
  j["targets"] = {{"L_L", margins.targets.lyapunov},
                  {"L_dL", margins.targets.lyapunov_jacobian},
                  {"L_C", margins.targets.controller}};
  nlohmann::json modes = nlohmann::json::array();
  for (std::size_t p = 0; p < report.modes.size(); ++p) {
    const ModeReport& m = report.modes[p];
    const ModeMargins& mm = margins.modes.at(p);
    const ModeConstants& c = spec.constants.at(p);
    nlohmann::json jm;
    jm["mode"] = m.mode_id;
    jm["pass"] = m.pass;
    jm["reference_value"] = m.reference_value;
    jm["zero_ok"] = m.zero_ok;
    jm["lipschitz_ok"] = m.lipschitz_ok;
    jm["guard_exits"] = m.guard_exits;
    jm["lyapunov_lipschitz"] = {{"function", m.lyapunov_cert.function_bound},
                                {"jacobian", m.lyapunov_cert.jacobian_bound},
                                {"loose", m.lyapunov_cert.loose}};
    jm["controller_lipschitz"] = {{"function", m.controller_cert.function_bound},
                                  {"loose", m.controller_cert.loose}};
    jm["sub_losses"] = m.sub_losses;
    nlohmann::json conds = nlohmann::json::object();
    for (int i = 0; i < 4; ++i) {
      const ConditionWorst& cw = m.conditions[i];
      if (!cw.evaluated) {
        conds[names[i]] = nullptr;
        continue;
      }
      conds[names[i]] = {{"worst", cw.value},
                         {"slack", cw.value - report.eta_hat},
                         {"x", vec_json(cw.x)},
                         {"w", vec_json(cw.w)}};
    }
    jm["conditions"] = conds;
    jm["margins"] = {{"lie_lip_x", mm.lie_lip_x},
                     {"lie_lip_w", mm.lie_lip_w},
                     {"barrier_lie_lip_x", mm.barrier_lie_lip_x},
                     {"barrier_lie_lip_w", mm.barrier_lie_lip_w},
                     {"delta_v", mm.delta_v},
                     {"delta_h", mm.delta_h},
                     {"lip_alpha1", mm.lip_alpha1},
                     {"lip_alpha2", mm.lip_alpha2},
                     {"lip_sigma", mm.lip_sigma},
                     {"condition_lipschitz", mm.condition_lipschitz},
                     {"composite", mm.composite}};
    jm["plant_constants"] = {{"L_x", c.lip_x}, {"L_u", c.lip_u}, {"L_w", c.lip_w}, {"M_f", c.bound_f}};
    modes.push_back(jm);
  }
  j["modes"] = modes;
  return j;
}

}  // namespace switchcert
