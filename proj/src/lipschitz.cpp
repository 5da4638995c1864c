#include "switchcert/lipschitz.hpp"

#include <cmath>

#include "switchcert/errors.hpp"

namespace switchcert {

SpectralNorm spectral_norm(const Mat& w, int max_iterations, double tolerance) {
  SpectralNorm out;
  const double frobenius = w.norm();
  out.left = Vec::Zero(w.rows());
  out.right = Vec::Zero(w.cols());
  if (frobenius == 0.0) {
    out.converged = true;
    return out;
  }
  // Deterministic, non-symmetric start so generic matrices are not orthogonal to it.
  Vec v(w.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.37 * static_cast<double>(i) / v.size();
  v.normalize();

  double theta = (w * v).squaredNorm();
  for (int it = 1; it <= max_iterations; ++it) {
    Vec next = w.transpose() * (w * v);
    const double n = next.norm();
    if (n == 0.0) break;
    v = next / n;
    const double updated = (w * v).squaredNorm();
    out.iterations = it;
    const bool done = std::abs(updated - theta) <= tolerance * updated;
    theta = updated;
    if (done) {
      out.converged = true;
      break;
    }
  }

  const Vec wv = w * v;
  out.estimate = std::sqrt(theta);
  out.right = v;
  out.left = out.estimate > 0.0 ? Vec(wv / out.estimate) : Vec::Zero(w.rows());
  if (out.converged) {
    const double residual = (w.transpose() * wv - theta * v).norm();
    out.value = std::min(frobenius, std::sqrt(theta + residual));
  } else {
    out.value = frobenius;
  }
  return out;
}

namespace {

struct LayerNorms {
  std::vector<SpectralNorm> spectral;
  std::vector<double> row_max;
  std::vector<Eigen::Index> row_arg;
  bool loose = false;
};

LayerNorms layer_norms(const Mlp& net) {
  LayerNorms ln;
  for (const Mat& w : net.weights()) {
    ln.spectral.push_back(spectral_norm(w));
    if (!ln.spectral.back().converged) ln.loose = true;
    Eigen::Index arg = 0;
    const double rmax = w.rowwise().norm().maxCoeff(&arg);
    ln.row_max.push_back(rmax);
    ln.row_arg.push_back(arg);
  }
  return ln;
}

struct BoundValue {
  double fn = 0.0;
  double jac = 0.0;
};

// Evaluates the layer recursion. If `wrt` names a variable (index into sigma
// for wrt < L, into rho for wrt >= L), also returns the partial derivatives.
BoundValue recursion(const std::vector<double>& sigma, const std::vector<double>& rho,
                     ActivationBounds act, double output_slope, int wrt, BoundValue* partial) {
  const std::size_t layers = sigma.size();
  double g = 1.0, h = 0.0, dg = 0.0, dh = 0.0;
  for (std::size_t k = 0; k + 1 < layers; ++k) {
    const double ds = (wrt == static_cast<int>(k)) ? 1.0 : 0.0;
    const double dr = (wrt == static_cast<int>(layers + k)) ? 1.0 : 0.0;
    const double g2 = g * g;
    const double nh = act.curvature * rho[k] * sigma[k] * g2 + act.slope * sigma[k] * h;
    const double ndh = act.curvature * (dr * sigma[k] * g2 + rho[k] * ds * g2 +
                                        rho[k] * sigma[k] * 2.0 * g * dg) +
                       act.slope * (ds * h + sigma[k] * dh);
    const double ng = act.slope * sigma[k] * g;
    const double ndg = act.slope * (ds * g + sigma[k] * dg);
    g = ng;
    h = nh;
    dg = ndg;
    dh = ndh;
  }
  const std::size_t out = layers - 1;
  const double ds = (wrt == static_cast<int>(out)) ? 1.0 : 0.0;
  BoundValue v{output_slope * sigma[out] * g, sigma[out] * h};
  if (partial) {
    partial->fn = output_slope * (ds * g + sigma[out] * dg);
    partial->jac = ds * h + sigma[out] * dh;
  }
  return v;
}

}  // namespace

LipschitzCertificate certify_lipschitz(const Mlp& net, double output_slope) {
  const LayerNorms ln = layer_norms(net);
  std::vector<double> sigma, rho = ln.row_max;
  for (const auto& s : ln.spectral) sigma.push_back(s.value);
  // rho <= sigma always; keep the tighter value when the spectral bound fell back.
  for (std::size_t k = 0; k < rho.size(); ++k) rho[k] = std::min(rho[k], sigma[k]);
  const BoundValue b =
      recursion(sigma, rho, activation_bounds(net.activation()), output_slope, -1, nullptr);
  LipschitzCertificate cert;
  cert.function_bound = b.fn;
  cert.jacobian_bound = b.jac;
  cert.loose = ln.loose;
  return cert;
}

double lipschitz_penalty(std::initializer_list<LipschitzTerm> terms) {
  double total = 0.0;
  for (const auto& t : terms) {
    if (!(t.target > 0.0)) throw ValidationError("lipschitz_penalty: targets must be positive");
    total += t.weight * std::max(0.0, t.certified - t.target);
  }
  return total;
}

double lipschitz_penalty(const Mlp& net, double target_fn, std::optional<double> target_jac,
                         double weight_fn, double weight_jac, double output_slope,
                         MlpGradient* grad) {
  if (!(target_fn > 0.0) || (target_jac && !(*target_jac > 0.0))) {
    throw ValidationError("lipschitz_penalty: targets must be positive");
  }
  const LayerNorms ln = layer_norms(net);
  std::vector<double> sigma, rho = ln.row_max;
  for (const auto& s : ln.spectral) sigma.push_back(s.value);
  const ActivationBounds act = activation_bounds(net.activation());
  const BoundValue b = recursion(sigma, rho, act, output_slope, -1, nullptr);

  const double gap_fn = b.fn - target_fn;
  const double gap_jac = target_jac ? b.jac - *target_jac : -1.0;
  const double penalty =
      weight_fn * std::max(0.0, gap_fn) + (target_jac ? weight_jac * std::max(0.0, gap_jac) : 0.0);
  if (!grad || penalty == 0.0) return penalty;

  const double c_fn = gap_fn > 0.0 ? weight_fn : 0.0;
  const double c_jac = gap_jac > 0.0 ? weight_jac : 0.0;
  const std::size_t layers = sigma.size();
  for (std::size_t k = 0; k < layers; ++k) {
    BoundValue d;
    recursion(sigma, rho, act, output_slope, static_cast<int>(k), &d);
    const double coeff = c_fn * d.fn + c_jac * d.jac;
    if (coeff != 0.0) {
      const auto& sn = ln.spectral[k];
      grad->weights[k].noalias() += coeff * sn.left * sn.right.transpose();
    }
    if (k + 1 < layers) {
      recursion(sigma, rho, act, output_slope, static_cast<int>(layers + k), &d);
      const double rc = c_fn * d.fn + c_jac * d.jac;
      if (rc != 0.0 && rho[k] > 0.0) {
        const Eigen::Index i = ln.row_arg[k];
        grad->weights[k].row(i) += rc * net.weights()[k].row(i) / rho[k];
      }
    }
  }
  return penalty;
}

}  // namespace switchcert
