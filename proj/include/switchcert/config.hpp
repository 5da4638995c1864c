#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "switchcert/box.hpp"
#include "switchcert/mlp.hpp"

namespace switchcert {

/// alpha_1(s) = k1 s^gamma1, alpha_2(s) = k2 s^gamma2, sigma(s) = kw s^gammaw.
struct ClassKInftyParams {
  double k1 = 0.5;
  double k2 = 2.0;
  double kw = 1.0;
  double gamma1 = 2.0;
  double gamma2 = 2.0;
  double gammaw = 2.0;

  double alpha1(double s) const;
  double alpha2(double s) const;
  double sigma(double s) const;
  void validate() const;
};

/// Per-mode plant constants supplied by the user: Lipschitz constants of the
/// vector field in x, u and (for additive disturbances) w, and a bound on |f|.
struct ModeConstants {
  double lip_x = 1.0;
  double lip_u = 1.0;
  double lip_w = 0.0;
  double bound_f = 1.0;
};

struct SwitchedSystemSpec {
  Eigen::Index n = 0;  // state dimension
  Eigen::Index m = 0;  // control dimension
  Eigen::Index r = 0;  // disturbance dimension
  std::vector<int> modes;  // mode identifiers, 1..l
  CompactBox state_box;
  CompactBox dist_box;
  std::optional<CompactBox> input_box;
  Vec reference;  // shifted equilibrium x*
  std::vector<ModeConstants> constants;

  std::size_t mode_count() const { return modes.size(); }
  /// Position of a mode identifier in `modes`; throws for unknown ids.
  std::size_t mode_index(int mode_id) const;
  void validate() const;
};

enum class SystemKind { LotkaVolterra, Linear, External };

/// How the dynamics are realized behind the flow-map interface.
struct SystemModel {
  SystemKind kind = SystemKind::LotkaVolterra;
  std::array<double, 4> lotka_volterra{1.0, 1.0, 1.0, 1.0};  // a, b, c, d
  std::vector<Vec> linear_drift;  // per mode, diagonal of A_p
  std::string command;           // external process command line
  double max_substep = 1e-3;     // RK4 substep inside one flow-map step
  double timeout_seconds = 10.0;
};

struct ModeCertificateParams {
  ClassKInftyParams k;
  double kappa = 0.5;
  double mu = 1.0;
};

struct CertificateConfig {
  std::vector<ModeCertificateParams> per_mode;
  double eps_x = 0.1;
  double eps_u = 0.1;
  double tau = 0.01;        // Lie-derivative sampling time
  int lie_substeps = 1;
  double target_lyapunov = 2.0;           // L_L
  double target_lyapunov_jacobian = 2.0;  // L_dL
  double target_controller = 2.0;         // L_C
  double exclusion_radius = 0.0;
  bool shared_v = false;
  std::vector<int> lyapunov_hidden{16, 16};
  std::vector<int> controller_hidden{16};
  Activation lyapunov_activation = Activation::Tanh;
  std::size_t max_samples = 2'000'000;
  int zeta_grid = 101;  // points per dimension of the comparison-constant grid
  double zero_tolerance = 1e-6;
};

struct TrainConfig {
  std::array<double, 5> loss_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<double, 3> lipschitz_weights{1.0, 1.0, 1.0};
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lr_decay = 1.0;  // multiplicative per epoch
  std::size_t batch_size = 256;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  double residual_tolerance = 1e-4;
  double fd_step = 1e-4;
  double hinge_margin = 0.0;  // extra slack demanded by the training hinges only
};

enum class SwitchPolicy { RoundRobin, SeededRandom };
enum class DisturbancePolicy { Zero, Constant, PiecewiseConstant };

struct SimulationConfig {
  double dt = 1e-3;
  double horizon = 20.0;
  Vec x0;
  double tau_d = 1.5;
  SwitchPolicy switch_policy = SwitchPolicy::RoundRobin;
  DisturbancePolicy disturbance_policy = DisturbancePolicy::PiecewiseConstant;
  double disturbance_hold = 0.5;
  Vec disturbance_value;  // constant policy
  std::uint64_t seed = 0;
};

struct Config {
  SwitchedSystemSpec system;
  SystemModel model;
  CertificateConfig certificate;
  TrainConfig training;
  SimulationConfig simulation;
  std::string hash;  // of the source byte stream
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

std::string to_string(SwitchPolicy p);
std::string to_string(DisturbancePolicy p);
SwitchPolicy switch_policy_from_string(const std::string& s);
DisturbancePolicy disturbance_policy_from_string(const std::string& s);

/// 64-bit FNV-1a over a byte stream, hex encoded.
std::string content_hash(const std::string& bytes);

}  // namespace switchcert
