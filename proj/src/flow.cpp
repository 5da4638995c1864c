#include "switchcert/flow.hpp"

#include <cmath>

#include "switchcert/errors.hpp"
#include "switchcert/external_flow.hpp"

namespace switchcert {

Vec rk4_step(const std::function<Vec(const Vec&)>& rhs, const Vec& x, double h) {
  const Vec k1 = rhs(x);
  const Vec k2 = rhs(x + 0.5 * h * k1);
  const Vec k3 = rhs(x + 0.5 * h * k2);
  const Vec k4 = rhs(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

VectorFieldFlow::VectorFieldFlow(std::vector<VectorField> fields, Eigen::Index n, Eigen::Index m,
                                 double max_substep)
    : fields_(std::move(fields)), n_(n), m_(m), max_substep_(max_substep) {
  if (fields_.empty()) throw ValidationError("flow: at least one mode is required");
  if (!(max_substep_ > 0.0)) throw ValidationError("flow: max_substep must be positive");
}

Vec VectorFieldFlow::step(std::size_t mode, const Vec& x, const Vec& u, const Vec& w, double dt) {
  if (mode >= fields_.size()) throw ValidationError("flow: mode index out of range");
  if (!(dt > 0.0)) throw ValidationError("flow: dt must be positive");
  if (x.size() != n_ || u.size() != m_) throw ValidationError("flow: dimension mismatch");
  const VectorField& f = fields_[mode];
  const auto substeps = static_cast<int>(std::ceil(dt / max_substep_ - 1e-9));
  const int k = std::max(1, substeps);
  const double h = dt / k;
  auto rhs = [&](const Vec& s) { return f(s, u, w); };
  Vec s = x;
  for (int i = 0; i < k; ++i) s = rk4_step(rhs, s, h);
  if (!s.allFinite()) throw NumericError("flow: non-finite state");
  return s;
}

const VectorField* VectorFieldFlow::vector_field(std::size_t mode) const {
  if (mode >= fields_.size()) throw ValidationError("flow: mode index out of range");
  return &fields_[mode];
}

std::unique_ptr<VectorFieldFlow> builtin_lotka_volterra(double a, double b, double c, double d,
                                                        double max_substep) {
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0) || !(d > 0.0)) {
    throw ValidationError("lotka_volterra: parameters a, b, c, d must be positive");
  }
  auto mode = [=](double g, double h) -> VectorField {
    return [=](const Vec& x, const Vec& u, const Vec&) {
      Vec dx(2);
      dx[0] = a * x[0] - b * x[0] * x[1] + g * u[0];
      dx[1] = -c * x[1] + d * x[0] * x[1] + h * u[0];
      return dx;
    };
  };
  return std::make_unique<VectorFieldFlow>(std::vector<VectorField>{mode(1, 0), mode(0, 1)}, 2, 1,
                                           max_substep);
}

std::unique_ptr<VectorFieldFlow> builtin_linear(std::vector<Vec> drift, double max_substep) {
  if (drift.empty()) throw ValidationError("linear: at least one mode is required");
  const Eigen::Index n = drift.front().size();
  std::vector<VectorField> fields;
  for (const Vec& a : drift) {
    if (a.size() != n) throw ValidationError("linear: drift vectors differ in length");
    fields.push_back([a](const Vec& x, const Vec& u, const Vec& w) -> Vec {
      return a.cwiseProduct(x) + u + w;
    });
  }
  return std::make_unique<VectorFieldFlow>(std::move(fields), n, n, max_substep);
}

std::unique_ptr<FlowMap> make_flow(const Config& cfg) {
  const auto& m = cfg.model;
  switch (m.kind) {
    case SystemKind::LotkaVolterra:
      return builtin_lotka_volterra(m.lotka_volterra[0], m.lotka_volterra[1], m.lotka_volterra[2],
                                    m.lotka_volterra[3], m.max_substep);
    case SystemKind::Linear:
      return builtin_linear(m.linear_drift, m.max_substep);
    case SystemKind::External:
      return std::make_unique<ExternalProcessFlow>(m.command, cfg.system.n, cfg.system.m,
                                                   cfg.system.mode_count(), m.timeout_seconds);
  }
  throw ValidationError("flow: unknown system kind");
}

}  // namespace switchcert
