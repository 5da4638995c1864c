#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "switchcert/box.hpp"
#include "switchcert/config.hpp"

namespace switchcert {

/// f_p(x, u, w). Disturbance-free plants ignore `w`.
using VectorField = std::function<Vec(const Vec& x, const Vec& u, const Vec& w)>;

/// Black-box access to the mode dynamics: Phi_p(x, u, dt) under zero-order-hold
/// input. Modes are addressed by 0-based index.
class FlowMap {
 public:
  virtual ~FlowMap() = default;

  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index control_dim() const = 0;
  virtual std::size_t mode_count() const = 0;

  virtual Vec step(std::size_t mode, const Vec& x, const Vec& u, const Vec& w, double dt) = 0;

  /// Analytic vector field for simulators that expose one; nullptr for black boxes.
  virtual const VectorField* vector_field(std::size_t /*mode*/) const { return nullptr; }
};

/// One classical RK4 step of x' = rhs(x).
Vec rk4_step(const std::function<Vec(const Vec&)>& rhs, const Vec& x, double h);

/// In-process flow map integrating known vector fields with fixed RK4 substeps
/// of size at most `max_substep`.
class VectorFieldFlow : public FlowMap {
 public:
  VectorFieldFlow(std::vector<VectorField> fields, Eigen::Index n, Eigen::Index m,
                  double max_substep = 1e-3);

  Eigen::Index state_dim() const override { return n_; }
  Eigen::Index control_dim() const override { return m_; }
  std::size_t mode_count() const override { return fields_.size(); }

  Vec step(std::size_t mode, const Vec& x, const Vec& u, const Vec& w, double dt) override;
  const VectorField* vector_field(std::size_t mode) const override;

 private:
  std::vector<VectorField> fields_;
  Eigen::Index n_;
  Eigen::Index m_;
  double max_substep_;
};

/// Switched Lotka-Volterra predator-prey plant. Mode 1 actuates the prey
/// equation, mode 2 the predator equation:
///   x1' = a x1 - b x1 x2 + g_p u,   x2' = -c x2 + d x1 x2 + h_p u,
///   (g_1, h_1) = (1, 0), (g_2, h_2) = (0, 1).
std::unique_ptr<VectorFieldFlow> builtin_lotka_volterra(double a, double b, double c, double d,
                                                        double max_substep = 1e-3);

/// Diagonal linear modes x' = diag(drift_p) x + u + w.
std::unique_ptr<VectorFieldFlow> builtin_linear(std::vector<Vec> drift, double max_substep = 1e-3);

/// Flow map described by a configuration (built-in or external process).
std::unique_ptr<FlowMap> make_flow(const Config& cfg);

}  // namespace switchcert
