#include "switchcert/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "switchcert/dwell.hpp"
#include "switchcert/errors.hpp"

namespace switchcert {

ClosedLoop::ClosedLoop(FlowMap& flow, const CertificateBundle& bundle, double max_substep)
    : flow_(&flow), bundle_(&bundle), max_substep_(max_substep) {
  if (!(max_substep > 0.0)) throw ValidationError("closed loop: max_substep must be positive");
}

Vec ClosedLoop::advance(std::size_t mode, const Vec& x, const Vec& w, double dt) const {
  if (!(dt > 0.0)) throw ValidationError("closed loop: dt must be positive");
  const Controller& ctrl = bundle_->controllers.at(mode);
  const VectorField* field = flow_->vector_field(mode);
  if (field == nullptr) return flow_->step(mode, x, ctrl.control(x, w), w, dt);

  const auto k = std::max<long long>(1, static_cast<long long>(std::ceil(dt / max_substep_ - 1e-9)));
  const double h = dt / static_cast<double>(k);
  auto rhs = [&](const Vec& z) { return (*field)(z, ctrl.control(z, w), w); };
  Vec z = x;
  for (long long i = 0; i < k; ++i) z = rk4_step(rhs, z, h);
  if (!z.allFinite()) throw NumericError("closed loop: non-finite state");
  return z;
}

std::size_t SwitchingSignal::mode_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return modes.at(static_cast<std::size_t>(it - times.begin()));
}

SwitchingSignal gen_switching(double tau_d, double horizon, std::size_t mode_count,
                              SwitchPolicy policy, std::uint64_t seed, std::size_t initial_mode) {
  if (mode_count < 1) throw ValidationError("switching: need at least one mode");
  if (!(tau_d > 0.0)) throw ValidationError("switching: tau_d must be positive");
  if (!(horizon > 0.0)) throw ValidationError("switching: horizon must be positive");
  if (initial_mode >= mode_count) throw ValidationError("switching: initial mode out of range");

  SwitchingSignal s;
  s.tau_d = tau_d;
  s.modes.push_back(initial_mode);
  if (mode_count == 1) return s;

  if (policy == SwitchPolicy::RoundRobin) {
    for (long long k = 1;; ++k) {
      const double t = static_cast<double>(k) * tau_d;
      if (t >= horizon) break;
      s.times.push_back(t);
      s.modes.push_back((s.modes.back() + 1) % mode_count);
    }
    return s;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(tau_d, 2.0 * tau_d);
  std::uniform_int_distribution<std::size_t> other(0, mode_count - 2);
  double t = 0.0;
  for (;;) {
    t += gap(rng);
    if (t >= horizon) break;
    std::size_t next = other(rng);
    if (next >= s.modes.back()) ++next;
    s.times.push_back(t);
    s.modes.push_back(next);
  }
  return s;
}

DisturbanceSignal::DisturbanceSignal(std::vector<Vec> values, double hold)
    : values_(std::move(values)), hold_(hold) {
  if (values_.empty()) throw ValidationError("disturbance: empty signal");
  if (!(hold_ > 0.0)) throw ValidationError("disturbance: hold must be positive");
}

Vec DisturbanceSignal::at(double t) const {
  const double k = std::floor(std::max(0.0, t) / hold_);
  const auto idx = std::min(values_.size() - 1, static_cast<std::size_t>(k));
  return values_[idx];
}

double DisturbanceSignal::sup_norm() const {
  double s = 0.0;
  for (const Vec& v : values_) s = std::max(s, v.norm());
  return s;
}

DisturbanceSignal gen_disturbance(const CompactBox& dist_box, double horizon,
                                  DisturbancePolicy policy, double hold, const Vec& value,
                                  std::uint64_t seed) {
  if (!(horizon > 0.0)) throw ValidationError("disturbance: horizon must be positive");
  switch (policy) {
    case DisturbancePolicy::Zero:
      return DisturbanceSignal({Vec::Zero(dist_box.dim())}, horizon);
    case DisturbancePolicy::Constant: {
      const Vec v = value.size() == 0 ? dist_box.hi() : value;
      if (v.size() != dist_box.dim() || !dist_box.contains(v)) {
        throw ValidationError("disturbance: constant value outside the disturbance box");
      }
      return DisturbanceSignal({v}, horizon);
    }
    case DisturbancePolicy::PiecewiseConstant: {
      if (!(hold > 0.0)) throw ValidationError("disturbance: hold must be positive");
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const auto count = static_cast<std::size_t>(std::ceil(horizon / hold)) + 1;
      std::vector<Vec> values;
      for (std::size_t k = 0; k < count; ++k) {
        Vec v(dist_box.dim());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
          v[i] = dist_box.lo()[i] + unit(rng) * (dist_box.hi()[i] - dist_box.lo()[i]);
        }
        values.push_back(std::move(v));
      }
      return DisturbanceSignal(std::move(values), hold);
    }
  }
  throw ValidationError("disturbance: unknown policy");
}

bool Trajectory::all_safe() const {
  return std::all_of(safe.begin(), safe.end(), [](bool s) { return s; });
}

Trajectory simulate_closed_loop(FlowMap& flow, const SwitchedSystemSpec& spec,
                                const CertificateBundle& bundle, const Vec& x0,
                                const SwitchingSignal& switching,
                                const DisturbanceSignal& disturbance, double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("simulate: dt must be positive");
  if (!(horizon > 0.0)) throw ValidationError("simulate: horizon must be positive");
  if (x0.size() != spec.n) throw ValidationError("simulate: x0 has the wrong dimension");
  if (!spec.state_box.contains(x0)) throw ValidationError("simulate: x0 lies outside the state box");
  if (switching.modes.empty()) throw ValidationError("simulate: empty switching signal");
  for (std::size_t m : switching.modes) {
    if (m >= bundle.mode_count()) throw ValidationError("simulate: switching signal names an unknown mode");
  }

  const ClosedLoop loop(flow, bundle, dt);
  const CompactBox guard = spec.state_box.inflated(2.0);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const double tol = 1e-9 * dt;

  Trajectory traj;
  Vec x = x0;
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (seg < switching.times.size() && t >= switching.times[seg] - tol) {
      SwitchEvent ev;
      ev.step = k;
      ev.t = t;
      ev.from = switching.modes[seg];
      ev.to = switching.modes[seg + 1];
      ev.v_before = bundle.lyapunov_value(ev.from, x);
      ev.v_after = bundle.lyapunov_value(ev.to, x);
      traj.switches.push_back(ev);
      ++seg;
    }
    const std::size_t mode = switching.modes[seg];
    const Vec w = disturbance.at(t);
    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.mode.push_back(mode);
    traj.w.push_back(w);
    traj.u.push_back(bundle.controllers[mode].control(x, w));
    traj.v_active.push_back(bundle.lyapunov_value(mode, x));
    traj.h.push_back(bundle.barrier.value(x));
    traj.safe.push_back(spec.state_box.contains(x));
    if (!guard.contains(x)) {
      traj.aborted = true;
      traj.abort_reason = "state left the guard box at t=" + format_double(t);
      break;
    }
    if (k == steps) break;
    Vec next;
    try {
      next = loop.advance(mode, x, w, dt);
    } catch (const NumericError&) {
      traj.aborted = true;
      traj.abort_reason = "non-finite state after t=" + format_double(t);
      break;
    }
    x = std::move(next);
  }
  return traj;
}

IssMonitor monitor_iss_bound(const Trajectory& traj, const CertificateBundle& bundle, double zeta,
                             double kappa, double tau_d) {
  IssMonitor mon;
  mon.rho = contraction_factor(zeta, kappa, tau_d);
  mon.gamma0 = iss_gain(zeta, kappa, tau_d);
  mon.lambda = iss_decay_rate(zeta, kappa, tau_d);
  if (traj.size() == 0) return mon;

  for (const Vec& w : traj.w) mon.w_norm = std::max(mon.w_norm, w.norm());
  const double s0 = (traj.x.front() - bundle.reference).norm();
  double a2 = 0.0;
  double sig = 0.0;
  for (const auto& p : bundle.params) {
    a2 = std::max(a2, p.k.alpha2(s0));
    sig = std::max(sig, p.k.sigma(mon.w_norm));
  }
  mon.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double bound = std::exp(-mon.lambda * traj.t[i]) * a2 + mon.gamma0 * sig;
    const double margin = bound - traj.v_active[i];
    mon.margins.push_back(margin);
    mon.min_margin = std::min(mon.min_margin, margin);
    if (!(margin >= 0.0)) mon.all_ok = false;
  }
  return mon;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(const Trajectory& traj, const SwitchedSystemSpec& spec,
                          const IssMonitor* monitor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("simulate: cannot write '" + path + "'");
  out << "t";
  for (Eigen::Index i = 1; i <= spec.n; ++i) out << ",x" << i;
  out << ",mode";
  for (Eigen::Index i = 1; i <= spec.r; ++i) out << ",w" << i;
  for (Eigen::Index i = 1; i <= spec.m; ++i) out << ",u" << i;
  out << ",V_active,h,iss_margin,safe\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.t[k]);
    for (Eigen::Index i = 0; i < traj.x[k].size(); ++i) out << ',' << format_double(traj.x[k][i]);
    out << ',' << spec.modes.at(traj.mode[k]);
    for (Eigen::Index i = 0; i < traj.w[k].size(); ++i) out << ',' << format_double(traj.w[k][i]);
    for (Eigen::Index i = 0; i < traj.u[k].size(); ++i) out << ',' << format_double(traj.u[k][i]);
    out << ',' << format_double(traj.v_active[k]) << ',' << format_double(traj.h[k]) << ',';
    if (monitor != nullptr && k < monitor->margins.size()) out << format_double(monitor->margins[k]);
    out << ',' << (traj.safe[k] ? "true" : "false") << '\n';
  }
}

}  // namespace switchcert
