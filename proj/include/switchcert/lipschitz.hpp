#pragma once

#include <optional>
#include <string>

#include "switchcert/mlp.hpp"

namespace switchcert {

struct SpectralNorm {
  double value = 0.0;     // certified upper bound on ||W||_2
  double estimate = 0.0;  // raw power-iteration estimate
  Vec left;               // unit left singular vector estimate
  Vec right;              // unit right singular vector estimate
  int iterations = 0;
  bool converged = false;
};

/// Power iteration on W^T W (at most `max_iterations`, stops once the relative
/// change drops below `tolerance`). The returned bound inflates the Rayleigh
/// estimate by the eigen-residual; on non-convergence it falls back to the
/// Frobenius norm.
SpectralNorm spectral_norm(const Mat& w, int max_iterations = 200, double tolerance = 1e-10);

/// Certified Lipschitz bounds of a network (function and input Jacobian).
struct LipschitzCertificate {
  double function_bound = 0.0;  // |net(x) - net(y)| <= function_bound |x - y|
  double jacobian_bound = 0.0;  // |Dnet(x) - Dnet(y)| <= jacobian_bound |x - y|
  bool loose = false;           // some layer fell back to the Frobenius norm
  std::string method = "spectral-product";
};

/// Layerwise bounds. With s = sup|phi'|, s2 = sup|phi''|, sigma_k = ||W_k||_2
/// and rho_k = max row norm of W_k, the hidden-layer recursion is
///
///   G_k = s sigma_k G_{k-1}                              (Lipschitz of layer-k output)
///   H_k = s2 rho_k sigma_k G_{k-1}^2 + s sigma_k H_{k-1}  (Lipschitz of its Jacobian)
///
/// from G_0 = 1, H_0 = 0, closed by the affine output layer:
/// function_bound = output_slope * sigma_out * G, jacobian_bound = sigma_out * H.
/// The H step uses |diag(phi'(z)) - diag(phi'(z'))|_2 = max_i |phi'(z_i) - phi'(z'_i)|
/// <= s2 max_i |w_i . (a - a')|.
LipschitzCertificate certify_lipschitz(const Mlp& net, double output_slope = 1.0);

/// Hinge penalty sum_i weight_i * max(0, certified_i - target_i).
/// Zero exactly when every certified bound is within its target.
struct LipschitzTerm {
  double certified;
  double target;
  double weight = 1.0;
};
double lipschitz_penalty(std::initializer_list<LipschitzTerm> terms);

/// Differentiable penalty for one network: weight_fn * (L_fn - target_fn)_+ plus,
/// when `target_jac` is given, weight_jac * (L_jac - target_jac)_+. Gradients
/// flow through the spectral and row norms and are accumulated into `grad`.
double lipschitz_penalty(const Mlp& net, double target_fn, std::optional<double> target_jac,
                         double weight_fn, double weight_jac, double output_slope,
                         MlpGradient* grad);

}  // namespace switchcert
