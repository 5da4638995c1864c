#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "switchcert/certify.hpp"

namespace switchcert {

/// Adam with bias correction for one network.
class Adam {
 public:
  Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double epsilon);

  void step(Mlp& net, const MlpGradient& grad);
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  long long steps() const { return t_; }

 private:
  MlpGradient m_;
  MlpGradient v_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long long t_ = 0;
};

/// One (mode, x, w) training sample.
struct TrainSample {
  std::size_t mode = 0;
  std::size_t state = 0;        // index into SampleSet::states
  std::size_t disturbance = 0;  // index into SampleSet::disturbances
};

/// Gradients for the networks a loss touches. `lyapunov` follows the bundle's
/// Lyapunov storage (one entry when shared).
struct BundleGradient {
  std::vector<MlpGradient> lyapunov;
  std::vector<MlpGradient> controllers;

  static BundleGradient zeros(const CertificateBundle& bundle);
  bool all_finite() const;
};

/// L1 = |V_p(x*)|; L2..L5 are hinge sums max(0, c_i - eta_hat + margin) of the
/// four conditions over the batch (L2, L3 once per distinct x). Samples within
/// the exclusion radius only enter L5.
std::array<double, 5> sub_losses(const ClosedLoop& loop, const SampleSet& samples,
                                 const std::vector<TrainSample>& batch,
                                 const ValidityMargins& margins, double hinge_margin = 0.0);

struct LossValue {
  std::array<double, 5> sub_losses{};
  double penalty = 0.0;
  double total = 0.0;
};

/// sum_i c_i L_i plus the Lipschitz hinge penalty of every network touched by
/// the batch. When `grad` is non-null, gradients are accumulated: exact for the
/// Lyapunov parameters, and through a central finite-difference sensitivity
/// of the zero-order-hold flow step for the controller parameters.
LossValue total_loss(const ClosedLoop& loop, const SampleSet& samples,
                     const std::vector<TrainSample>& batch, const ValidityMargins& margins,
                     const TrainConfig& cfg, BundleGradient* grad);

enum class TrainStatus { Certified, Ispss, NoCertificate, Partial };
std::string to_string(TrainStatus s);
/// 0 certified, 10 ISpS residual stop, 11 otherwise.
int exit_code(TrainStatus s);

struct EpochRecord {
  int epoch = 0;
  std::array<double, 5> sub_losses{};  // over the full grid
  double penalty = 0.0;
  double loss = 0.0;
  std::array<double, 4> worst{};  // worst (c_i - eta_hat) over the trained modes
  double worst_slack = 0.0;
  bool pass = false;
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<std::size_t> modes;  // trained mode indices
  TrainStatus status = TrainStatus::NoCertificate;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_worst_slack = 0.0;
  std::vector<EpochRecord> log;
  bool diverged = false;
  std::string message;
};

void write_training_log(const TrainResult& result, const std::string& path);

/// Trains the given modes of `bundle` in place. One mode unless the bundle
/// shares its Lyapunov net, in which case all modes are trained jointly.
TrainResult train_modes(FlowMap& flow, const SwitchedSystemSpec& spec, CertificateBundle& bundle,
                        const std::vector<std::size_t>& modes, const SampleSet& samples,
                        const ValidityMargins& margins, const Config& cfg);

/// Single-mode training (the bundle must not be shared).
TrainResult train_mode(FlowMap& flow, const SwitchedSystemSpec& spec, CertificateBundle& bundle,
                       std::size_t mode, const SampleSet& samples, const ValidityMargins& margins,
                       const Config& cfg);

using FlowFactory = std::function<std::unique_ptr<FlowMap>()>;

struct TrainAllResult {
  CertificateBundle bundle;
  std::vector<TrainResult> runs;
  ValidityMargins margins;
  VerificationReport report;
  TrainStatus status = TrainStatus::NoCertificate;
};

/// Initializes and trains every mode (independent workers when not shared,
/// SWITCHCERT_WORKERS sets their number), then verifies the whole bundle and
/// attaches zeta and the dwell bound.
TrainAllResult train_all(const FlowFactory& make, const Config& cfg, const SampleSet& samples);

/// Worker count from SWITCHCERT_WORKERS (default 1).
unsigned worker_count();

}  // namespace switchcert
