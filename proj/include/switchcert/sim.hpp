#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "switchcert/bundle.hpp"
#include "switchcert/config.hpp"
#include "switchcert/flow.hpp"

namespace switchcert {

/// Closed loop x' = f_p(x, g_p(x, w), w) with w held over each call.
/// When the flow exposes its vector field, every RK4 stage recomputes the
/// control; otherwise the control is held over the step (zero-order hold).
class ClosedLoop {
 public:
  ClosedLoop(FlowMap& flow, const CertificateBundle& bundle, double max_substep = 1e-3);

  FlowMap& flow() const { return *flow_; }
  const CertificateBundle& bundle() const { return *bundle_; }

  Vec advance(std::size_t mode, const Vec& x, const Vec& w, double dt) const;

 private:
  FlowMap* flow_;
  const CertificateBundle* bundle_;
  double max_substep_;
};

/// Switch instants t_1 < t_2 < ... and the active mode (0-based index) on each interval.
struct SwitchingSignal {
  std::vector<double> times;
  std::vector<std::size_t> modes;  // modes[i] is active on [t_i, t_{i+1}), t_0 = 0
  double tau_d = 0.0;

  std::size_t mode_at(double t) const;
};

/// Round-robin switches at k tau_d; the seeded-random policy draws gaps
/// uniformly in [tau_d, 2 tau_d] and the next mode uniformly among the others.
SwitchingSignal gen_switching(double tau_d, double horizon, std::size_t mode_count,
                              SwitchPolicy policy, std::uint64_t seed,
                              std::size_t initial_mode = 0);

/// Piecewise-constant disturbance w(t) = values[floor(t / hold)] (last value held).
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(std::vector<Vec> values, double hold);

  Vec at(double t) const;
  double sup_norm() const;
  double hold() const { return hold_; }
  const std::vector<Vec>& values() const { return values_; }

 private:
  std::vector<Vec> values_;
  double hold_ = 1.0;
};

/// `value` is used by the constant policy (defaults to the box maximum);
/// `hold` and `seed` by the piecewise-constant policy.
DisturbanceSignal gen_disturbance(const CompactBox& dist_box, double horizon,
                                  DisturbancePolicy policy, double hold, const Vec& value,
                                  std::uint64_t seed);

struct SwitchEvent {
  std::size_t step = 0;
  double t = 0.0;
  std::size_t from = 0;
  std::size_t to = 0;
  double v_before = 0.0;  // V_from at the switch state
  double v_after = 0.0;   // V_to at the same state
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<std::size_t> mode;
  std::vector<Vec> w;
  std::vector<Vec> u;
  std::vector<double> v_active;
  std::vector<double> h;
  std::vector<bool> safe;
  std::vector<SwitchEvent> switches;
  bool aborted = false;
  std::string abort_reason;

  std::size_t size() const { return t.size(); }
  bool all_safe() const;
};

/// Fixed-step closed-loop rollout over [0, horizon]. Switches take effect at
/// the first grid time at or after each switch instant. Leaving X clears the
/// safe flag; leaving X scaled 2x about its center (or a non-finite state)
/// ends the run with a partial trajectory.
Trajectory simulate_closed_loop(FlowMap& flow, const SwitchedSystemSpec& spec,
                                const CertificateBundle& bundle, const Vec& x0,
                                const SwitchingSignal& switching,
                                const DisturbanceSignal& disturbance, double horizon, double dt);

struct IssMonitor {
  double lambda = 0.0;
  double gamma0 = 0.0;
  double rho = 0.0;
  double w_norm = 0.0;
  std::vector<double> margins;  // bound - V_active per step
  bool all_ok = true;
  double min_margin = 0.0;
};

/// Checks V_p(t)(x(t)) <= exp(-lambda t) alpha2(|x(0) - x*|) + gamma0 sigma(|w|_inf)
/// at every recorded step, using the largest alpha2 and sigma over the modes.
IssMonitor monitor_iss_bound(const Trajectory& traj, const CertificateBundle& bundle, double zeta,
                             double kappa, double tau_d);

/// `t, x1..xn, mode, w1..wr, u1..um, V_active, h, iss_margin, safe`, shortest
/// round-trip decimals. Mode is written as its 1-based identifier.
void write_trajectory_csv(const Trajectory& traj, const SwitchedSystemSpec& spec,
                          const IssMonitor* monitor, const std::string& path);

/// Formats a double with the shortest representation that parses back exactly.
std::string format_double(double v);

}  // namespace switchcert
