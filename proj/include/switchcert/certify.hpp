#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchcert/bundle.hpp"
#include "switchcert/config.hpp"
#include "switchcert/cover.hpp"
#include "switchcert/dwell.hpp"
#include "switchcert/sim.hpp"

namespace switchcert {

/// k s^gamma for s >= 0.
double class_k_eval(double k, double gamma, double s);
/// Lipschitz constant of s -> k s^gamma on [0, R]: k gamma R^(gamma - 1).
double class_k_lipschitz(double k, double gamma, double radius);

/// Lipschitz constant in x of the Lie derivative of V along the closed loop:
/// M_L (L_x + L_u L_C) + M_f L_dL.
double lie_lipschitz_x(double m_l, double lip_x, double lip_u, double lip_c, double bound_f,
                       double lip_dl);
/// Error bound of the difference-quotient Lie estimate: tau lie_lip M_f / 2.
double lie_error_bound(double tau, double lie_lip, double bound_f);

/// Network Lipschitz budgets fixed before training.
struct LipschitzTargets {
  double lyapunov = 0.0;           // L_L, also used as the gradient bound M_L
  double lyapunov_jacobian = 0.0;  // L_dL
  double controller = 0.0;         // L_C

  static LipschitzTargets from(const CertificateConfig& cfg);
};

struct ModeMargins {
  double lie_lip_x = 0.0;          // Lipschitz in x of the Lie derivative of V
  double lie_lip_w = 0.0;          // ... and in w
  double barrier_lie_lip_x = 0.0;  // same for h
  double barrier_lie_lip_w = 0.0;
  double delta_v = 0.0;            // Lie-estimate error of V
  double delta_h = 0.0;            // Lie-estimate error of h
  double lip_alpha1 = 0.0;
  double lip_alpha2 = 0.0;
  double lip_sigma = 0.0;
  std::array<double, 4> condition_lipschitz{};  // per condition
  double composite = 0.0;                       // max of condition_lipschitz
};

struct ValidityMargins {
  std::vector<ModeMargins> modes;
  double tau = 0.0;
  double eps = 0.0;
  double eta_hat = 0.0;          // -max_p composite * eps
  double exclusion_radius = 0.0;  // c1..c3 are only imposed at samples this far from x*
  LipschitzTargets targets;
};

ValidityMargins compute_margins(const SwitchedSystemSpec& spec,
                                const std::vector<ModeCertificateParams>& params,
                                const ProductBarrier& barrier, const LipschitzTargets& targets,
                                double eps, double tau, double exclusion_radius = 0.0);

ValidityMargins compute_margins(const SwitchedSystemSpec& spec, const CertificateBundle& bundle,
                                const CertificateConfig& cfg, const SampleSet& samples);

/// Difference quotients of V_p and h along the closed loop over [0, tau].
struct LieSample {
  double lie_v = 0.0;
  double lie_h = 0.0;
  Vec end_state;
  bool guard_exit = false;  // trajectory left the guard box (X scaled 1.5x)
};

LieSample lie_sample(const ClosedLoop& loop, std::size_t mode, const Vec& x, const Vec& w,
                     double tau, int substeps = 1);

/// (V_p(x(tau)) - V_p(x)) / tau.
double lie_estimate(const ClosedLoop& loop, std::size_t mode, const Vec& x, const Vec& w,
                    double tau, int substeps = 1);

/// The four condition left-hand sides at (x, w):
///   c1 = -V + alpha1(|x~|)
///   c2 =  V - alpha2(|x~|)
///   c3 =  lie_V + kappa V - sigma(|w|) + delta_V
///   c4 = -lie_h - mu h + delta_h
/// each of which must stay <= eta_hat. Passing a null `margins` drops the delta terms.
std::array<double, 4> check_point(const CertificateBundle& bundle, const ValidityMargins* margins,
                                  std::size_t mode, const Vec& x, const Vec& w, double lie_v,
                                  double lie_h);

struct ConditionWorst {
  double value = -std::numeric_limits<double>::infinity();
  Vec x;
  Vec w;
  bool evaluated = false;
};

struct ModeReport {
  int mode_id = 0;
  std::array<ConditionWorst, 4> conditions;
  std::array<double, 5> sub_losses{};  // grid hinge sums L1..L5
  double reference_value = 0.0;
  bool zero_ok = false;
  LipschitzCertificate lyapunov_cert;
  LipschitzCertificate controller_cert;
  bool lipschitz_ok = false;
  std::size_t guard_exits = 0;
  bool pass = false;

  /// max over conditions of (worst value - eta_hat); <= 0 when every condition holds.
  double worst_slack(double eta_hat) const;
};

struct VerificationReport {
  std::vector<ModeReport> modes;
  double eta_hat = 0.0;
  double eps = 0.0;
  double tau = 0.0;
  double exclusion_radius = 0.0;
  std::optional<double> zeta;
  std::size_t zeta_excluded = 0;
  double kappa_min = 0.0;
  std::optional<double> tau_d_min;
  bool pass = false;
  std::string config_hash;
  std::vector<std::string> notes;

  double worst_slack() const;
};

/// Evaluates one mode on every (x, w) pair of `samples`.
ModeReport evaluate_mode(const ClosedLoop& loop, const SwitchedSystemSpec& spec,
                         const ValidityMargins& margins, const SampleSet& samples,
                         std::size_t mode, double zero_tolerance, int lie_substeps);

/// Full-grid check of every mode. Does not fill the zeta fields.
VerificationReport verify_full(FlowMap& flow, const SwitchedSystemSpec& spec,
                               const CertificateBundle& bundle, const ValidityMargins& margins,
                               const SampleSet& samples, double zero_tolerance = 1e-6,
                               int lie_substeps = 1);

/// Regular grid with `points_per_dim` points per axis including the faces.
std::vector<Vec> uniform_grid(const CompactBox& box, int points_per_dim);

struct ZetaEstimate {
  double zeta = 1.0;
  std::size_t excluded = 0;
  Vec argmax;
};

/// max over the grid of max_{p,p'} V_p / V_p'. Points within `exclusion_radius`
/// of x*, or where min_p V_p < 1e-8 max V, are skipped and counted.
ZetaEstimate estimate_zeta(const CertificateBundle& bundle, const std::vector<Vec>& grid,
                           double exclusion_radius = 0.0);

/// Fills zeta, kappa_min and tau_d_min (single-mode and shared bundles give zeta = 1).
void attach_dwell(VerificationReport& report, const CertificateBundle& bundle,
                  const std::vector<Vec>& grid, double exclusion_radius);

nlohmann::json report_to_json(const VerificationReport& report, const ValidityMargins& margins,
                              const SwitchedSystemSpec& spec);

}  // namespace switchcert
