#include "switchcert/bundle.hpp"

#include <cmath>

#include "switchcert/errors.hpp"

namespace switchcert {

Controller::Controller(Mlp net, Vec reference, std::optional<CompactBox> input_box)
    : net_(std::move(net)), reference_(std::move(reference)), input_box_(std::move(input_box)) {
  if (input_box_ && input_box_->dim() != net_.output_dim()) {
    throw ValidationError("controller: input box dimension differs from network output");
  }
}

Vec Controller::input(const Vec& x, const Vec& w) const {
  Vec in(x.size() + w.size());
  in << x - reference_, w;
  return in;
}

Vec Controller::saturate(const Vec& raw) const {
  if (!input_box_) return raw;
  const Vec c = input_box_->center();
  const Vec s = 0.5 * input_box_->width();
  Vec u(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) u[i] = c[i] + s[i] * std::tanh((raw[i] - c[i]) / s[i]);
  return u;
}

Vec Controller::control(const Vec& x, const Vec& w) const { return saturate(net_.forward(input(x, w))); }

Vec Controller::control(const Vec& x, const Vec& w, Trace& trace) const {
  trace.raw = net_.forward(input(x, w), trace.tape);
  return saturate(trace.raw);
}

void Controller::backward(const Trace& trace, const Vec& adjoint, MlpGradient* grad) const {
  Vec adj = adjoint;
  if (input_box_) {
    const Vec c = input_box_->center();
    const Vec s = 0.5 * input_box_->width();
    for (Eigen::Index i = 0; i < adj.size(); ++i) {
      const double t = std::tanh((trace.raw[i] - c[i]) / s[i]);
      adj[i] *= 1.0 - t * t;
    }
  }
  net_.backward(trace.tape, adj, grad);
}

double CertificateBundle::lyapunov_value(std::size_t p, const Vec& x) const {
  return lyapunov_net(p).forward_scalar(x - reference);
}

Vec CertificateBundle::lyapunov_gradient(std::size_t p, const Vec& x) const {
  return lyapunov_net(p).input_gradient(x - reference);
}

double CertificateBundle::kappa_min() const {
  double k = params.at(0).kappa;
  for (const auto& p : params) k = std::min(k, p.kappa);
  return k;
}

LipschitzCertificate CertificateBundle::lyapunov_certificate(std::size_t p) const {
  return certify_lipschitz(lyapunov_net(p));
}

LipschitzCertificate CertificateBundle::controller_certificate(std::size_t p) const {
  return certify_lipschitz(controllers.at(p).net());
}

void CertificateBundle::recenter() {
  const Vec zero = Vec::Zero(reference.size());
  for (Mlp& v : lyapunov) v.biases().back()[0] -= v.forward_scalar(zero);
}

void CertificateBundle::validate() const {
  if (controllers.empty()) throw ValidationError("bundle: no modes");
  if (params.size() != controllers.size()) throw ValidationError("bundle: params/controllers mismatch");
  if (lyapunov.size() != (shared_v ? 1 : controllers.size())) {
    throw ValidationError("bundle: Lyapunov net count inconsistent with shared_v");
  }
  for (const auto& p : params) {
    p.k.validate();
    if (!(p.kappa > 0.0) || !(p.mu > 0.0)) throw ValidationError("bundle: kappa and mu must be positive");
  }
  for (const auto& v : lyapunov) {
    v.validate();
    if (v.input_dim() != reference.size() || v.output_dim() != 1) {
      throw ValidationError("bundle: Lyapunov net has the wrong shape");
    }
  }
  for (const auto& c : controllers) c.net().validate();
}

CertificateBundle initialize_bundle(const Config& cfg, std::mt19937_64& rng) {
  const auto& sys = cfg.system;
  const auto& cert = cfg.certificate;
  CertificateBundle b;
  b.shared_v = cert.shared_v;
  b.reference = sys.reference;
  b.barrier = ProductBarrier(sys.state_box);
  b.params = cert.per_mode;
  b.config_hash = cfg.hash;

  std::vector<int> vs{static_cast<int>(sys.n)};
  vs.insert(vs.end(), cert.lyapunov_hidden.begin(), cert.lyapunov_hidden.end());
  vs.push_back(1);
  std::vector<int> cs{static_cast<int>(sys.n + sys.r)};
  cs.insert(cs.end(), cert.controller_hidden.begin(), cert.controller_hidden.end());
  cs.push_back(static_cast<int>(sys.m));

  const std::size_t nv = cert.shared_v ? 1 : sys.mode_count();
  for (std::size_t p = 0; p < nv; ++p) {
    b.lyapunov.push_back(Mlp::glorot(vs, cert.lyapunov_activation, rng, cert.target_lyapunov));
  }
  for (std::size_t p = 0; p < sys.mode_count(); ++p) {
    Mlp g = Mlp::glorot(cs, Activation::Tanh, rng, cert.target_controller);
    b.controllers.emplace_back(std::move(g), sys.reference, sys.input_box);
  }
  b.recenter();
  return b;
}

}  // namespace switchcert
