#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "switchcert/barrier.hpp"
#include "switchcert/config.hpp"
#include "switchcert/lipschitz.hpp"
#include "switchcert/mlp.hpp"

namespace switchcert {

/// Feedback law u = sat(net([x - x*, w])). Without an input box the
/// saturation is the identity; with one, each channel is squashed smoothly as
/// c + s tanh((v - c)/s) (center c, half-width s), which has slope <= 1.
class Controller {
 public:
  struct Trace {
    Mlp::Tape tape;
    Vec raw;  // pre-saturation output
  };

  Controller() = default;
  Controller(Mlp net, Vec reference, std::optional<CompactBox> input_box);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  const std::optional<CompactBox>& input_box() const { return input_box_; }

  Vec control(const Vec& x, const Vec& w) const;
  Vec control(const Vec& x, const Vec& w, Trace& trace) const;

  /// Accumulates parameter gradients for dLoss/du = `adjoint`.
  void backward(const Trace& trace, const Vec& adjoint, MlpGradient* grad) const;

 private:
  Vec input(const Vec& x, const Vec& w) const;
  Vec saturate(const Vec& raw) const;

  Mlp net_;
  Vec reference_;
  std::optional<CompactBox> input_box_;
};

/// Per-mode Lyapunov nets V_p (a single shared net in common-Lyapunov mode),
/// controllers g_p, class-K-infinity parameters, decay rates kappa_p and
/// barrier slopes mu_p, plus the shared barrier and reference point.
struct CertificateBundle {
  std::vector<Mlp> lyapunov;  // size 1 when shared_v, else one per mode
  std::vector<Controller> controllers;
  std::vector<ModeCertificateParams> params;
  bool shared_v = false;
  Vec reference;
  ProductBarrier barrier;
  std::string config_hash;

  std::size_t mode_count() const { return controllers.size(); }
  Mlp& lyapunov_net(std::size_t p) { return lyapunov[shared_v ? 0 : p]; }
  const Mlp& lyapunov_net(std::size_t p) const { return lyapunov[shared_v ? 0 : p]; }

  /// V_p evaluated in shifted coordinates x - x*.
  double lyapunov_value(std::size_t p, const Vec& x) const;
  Vec lyapunov_gradient(std::size_t p, const Vec& x) const;

  double kappa_min() const;
  LipschitzCertificate lyapunov_certificate(std::size_t p) const;
  LipschitzCertificate controller_certificate(std::size_t p) const;

  /// Shifts the output bias of every Lyapunov net so that V_p(x*) = 0.
  void recenter();

  void validate() const;
};

/// Freshly initialized bundle for a configuration (Glorot weights seeded from `rng`).
CertificateBundle initialize_bundle(const Config& cfg, std::mt19937_64& rng);

}  // namespace switchcert
