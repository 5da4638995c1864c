#include "switchcert/mlp.hpp"

#include <cmath>

#include "switchcert/errors.hpp"
#include "switchcert/lipschitz.hpp"

namespace switchcert {

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ValidationError("unknown activation '" + name + "'");
}

ActivationBounds activation_bounds(Activation act) {
  switch (act) {
    // tanh'' = -2 tanh sech^2, extremal at tanh = 1/sqrt(3)
    case Activation::Tanh: return {1.0, 4.0 / (3.0 * std::sqrt(3.0))};
    // softplus'' = sigmoid' <= 1/4
    case Activation::Softplus: return {1.0, 0.25};
    // sigmoid'' = s(1-s)(1-2s), extremal value sqrt(3)/18
    case Activation::Sigmoid: return {0.25, std::sqrt(3.0) / 18.0};
  }
  return {1.0, 1.0};
}

double activate(Activation act, double z) {
  switch (act) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Softplus: return z > 30.0 ? z : std::log1p(std::exp(z));
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double activate_derivative(Activation act, double z) {
  switch (act) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

void MlpGradient::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void MlpGradient::add_scaled(const MlpGradient& other, double scale) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] += scale * other.weights[k];
    biases[k] += scale * other.biases[k];
  }
}

double MlpGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

bool MlpGradient::all_finite() const {
  for (const auto& w : weights) if (!w.allFinite()) return false;
  for (const auto& b : biases) if (!b.allFinite()) return false;
  return true;
}

Mlp::Mlp(std::vector<int> sizes, Activation activation)
    : sizes_(std::move(sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw ValidationError("mlp: need at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw ValidationError("mlp: layer sizes must be positive");
  }
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    weights_.push_back(Mat::Zero(sizes_[k + 1], sizes_[k]));
    biases_.push_back(Vec::Zero(sizes_[k + 1]));
  }
}

Mlp Mlp::glorot(std::vector<int> sizes, Activation activation, std::mt19937_64& rng,
                double target_lipschitz) {
  Mlp net(std::move(sizes), activation);
  const double depth = static_cast<double>(net.layer_count());
  const double slope = activation_bounds(activation).slope;
  // Per-layer norm so that prod_k sigma_k * slope^(depth-1) = 0.9^depth * target.
  const double per_layer =
      0.9 * std::pow(target_lipschitz / std::pow(slope, depth - 1.0), 1.0 / depth);
  for (auto& w : net.weights_) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
    const double sigma = spectral_norm(w).value;
    if (sigma > 0.0) w *= per_layer / sigma;
  }
  return net;
}

Vec Mlp::forward(const Vec& input) const {
  if (input.size() != sizes_.front()) {
    throw ValidationError("mlp: input dimension " + std::to_string(input.size()) +
                          " does not match " + std::to_string(sizes_.front()));
  }
  Vec a = input;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t k = 0; k < last; ++k) {
    Vec z = weights_[k] * a + biases_[k];
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(activation_, z[i]);
    a = std::move(z);
  }
  return weights_[last] * a + biases_[last];
}

Vec Mlp::forward(const Vec& input, Tape& tape) const {
  if (input.size() != sizes_.front()) {
    throw ValidationError("mlp: input dimension " + std::to_string(input.size()) +
                          " does not match " + std::to_string(sizes_.front()));
  }
  const std::size_t last = weights_.size() - 1;
  tape.inputs.resize(weights_.size());
  tape.preactivations.resize(last);
  tape.inputs[0] = input;
  for (std::size_t k = 0; k < last; ++k) {
    tape.preactivations[k] = weights_[k] * tape.inputs[k] + biases_[k];
    Vec a(tape.preactivations[k].size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = activate(activation_, tape.preactivations[k][i]);
    tape.inputs[k + 1] = std::move(a);
  }
  return weights_[last] * tape.inputs[last] + biases_[last];
}

double Mlp::forward_scalar(const Vec& input) const {
  if (output_dim() != 1) throw ValidationError("mlp: forward_scalar on vector-output network");
  return forward(input)[0];
}

Vec Mlp::backward(const Tape& tape, const Vec& adjoint, MlpGradient* grad) const {
  if (adjoint.size() != output_dim()) throw ValidationError("mlp: adjoint dimension mismatch");
  Vec adj = adjoint;
  for (std::size_t k = weights_.size(); k-- > 0;) {
    if (k + 1 < weights_.size()) {
      const Vec& z = tape.preactivations[k];
      for (Eigen::Index i = 0; i < adj.size(); ++i) adj[i] *= activate_derivative(activation_, z[i]);
    }
    if (grad) {
      grad->weights[k].noalias() += adj * tape.inputs[k].transpose();
      grad->biases[k] += adj;
    }
    adj = weights_[k].transpose() * adj;
  }
  return adj;
}

Vec Mlp::input_gradient(const Vec& input) const {
  if (output_dim() != 1) throw ValidationError("mlp: input_gradient needs a scalar-output network");
  Tape tape;
  forward(input, tape);
  return backward(tape, Vec::Ones(1), nullptr);
}

MlpGradient Mlp::zero_gradient() const {
  MlpGradient g;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    g.weights.push_back(Mat::Zero(weights_[k].rows(), weights_[k].cols()));
    g.biases.push_back(Vec::Zero(biases_[k].size()));
  }
  return g;
}

void Mlp::apply(const MlpGradient& delta) {
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    weights_[k] += delta.weights[k];
    biases_[k] += delta.biases[k];
  }
}

bool Mlp::all_finite() const {
  for (const auto& w : weights_) if (!w.allFinite()) return false;
  for (const auto& b : biases_) if (!b.allFinite()) return false;
  return true;
}

void Mlp::validate() const {
  if (sizes_.size() < 2 || weights_.size() + 1 != sizes_.size()) {
    throw ValidationError("mlp: inconsistent layer count");
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k].rows() != sizes_[k + 1] || weights_[k].cols() != sizes_[k] ||
        biases_[k].size() != sizes_[k + 1]) {
      throw ValidationError("mlp: shape chain broken at layer " + std::to_string(k));
    }
  }
  if (!all_finite()) throw NumericError("mlp: non-finite parameter");
}

bool Mlp::operator==(const Mlp& other) const {
  if (sizes_ != other.sizes_ || activation_ != other.activation_) return false;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] != other.weights_[k] || biases_[k] != other.biases_[k]) return false;
  }
  return true;
}

}  // namespace switchcert
