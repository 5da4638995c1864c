#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "switchcert/box.hpp"

namespace switchcert {

/// Twice-differentiable activations. All have slope in [0, 1].
enum class Activation { Tanh, Softplus, Sigmoid };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// sup |phi'| and sup |phi''| over the real line.
struct ActivationBounds {
  double slope;
  double curvature;
};
ActivationBounds activation_bounds(Activation act);

double activate(Activation act, double z);
double activate_derivative(Activation act, double z);

/// Parameter-shaped accumulator for gradients (and Adam moments).
struct MlpGradient {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  void set_zero();
  void add_scaled(const MlpGradient& other, double scale);
  double squared_norm() const;
  bool all_finite() const;
};

/// Dense feed-forward network: hidden layers apply `activation`, the final
/// layer is affine. Layer k maps sizes[k] -> sizes[k+1].
class Mlp {
 public:
  /// Intermediate values of one forward pass, consumed by backward().
  struct Tape {
    std::vector<Vec> inputs;       // inputs[k] is the input to layer k
    std::vector<Vec> preactivations;  // hidden layers only
  };

  Mlp() = default;
  /// Zero-initialized network with the given layer sizes (at least two entries).
  Mlp(std::vector<int> sizes, Activation activation);

  /// Glorot-uniform weights, each layer rescaled so the spectral-norm product
  /// starts at 0.9^depth * target_lipschitz. Biases are zero.
  static Mlp glorot(std::vector<int> sizes, Activation activation, std::mt19937_64& rng,
                    double target_lipschitz);

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }

  std::vector<Mat>& weights() { return weights_; }
  const std::vector<Mat>& weights() const { return weights_; }
  std::vector<Vec>& biases() { return biases_; }
  const std::vector<Vec>& biases() const { return biases_; }

  Vec forward(const Vec& input) const;
  Vec forward(const Vec& input, Tape& tape) const;
  double forward_scalar(const Vec& input) const;

  /// Reverse pass for output adjoint `adjoint` (dLoss/dOutput). Accumulates
  /// parameter gradients into `grad` when non-null and returns dLoss/dInput.
  Vec backward(const Tape& tape, const Vec& adjoint, MlpGradient* grad) const;

  /// d output / d input for a scalar-output network.
  Vec input_gradient(const Vec& input) const;

  MlpGradient zero_gradient() const;
  void apply(const MlpGradient& delta);  // params += delta

  bool all_finite() const;
  void validate() const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::Tanh;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

}  // namespace switchcert
