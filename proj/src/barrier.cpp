#include "switchcert/barrier.hpp"

#include <cmath>

namespace switchcert {

// With g_i = (x_i - lo_i)(hi_i - x_i) and w_i = hi_i - lo_i on the box:
// 0 <= g_i <= (w_i/2)^2, |g_i'| <= w_i, g_i'' = -2. Dividing by the scale gives
// the entrywise bounds |d_i h| <= 4/w_i, |d_ii h| <= 8/w_i^2 and
// |d_ij h| <= 16/(w_i w_j); the Frobenius norm of the bound matrix dominates
// the spectral norm of the Hessian.
ProductBarrier::ProductBarrier(CompactBox box) : box_(std::move(box)) {
  const Vec w = box_.width();
  scale_ = 1.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) scale_ *= 0.25 * w[i] * w[i];

  double g2 = 0.0;
  double h2 = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    g2 += 16.0 / (w[i] * w[i]);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double e = (i == j) ? 8.0 / (w[i] * w[i]) : 16.0 / (w[i] * w[j]);
      h2 += e * e;
    }
  }
  gradient_bound_ = std::sqrt(g2);
  hessian_bound_ = std::sqrt(h2);
}

double ProductBarrier::value(const Vec& x) const {
  double p = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p *= (x[i] - box_.lo()[i]) * (box_.hi()[i] - x[i]);
  }
  return p / scale_;
}

Vec ProductBarrier::gradient(const Vec& x) const {
  const Eigen::Index n = x.size();
  Vec g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = box_.hi()[i] + box_.lo()[i] - 2.0 * x[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) p *= (x[j] - box_.lo()[j]) * (box_.hi()[j] - x[j]);
    }
    g[i] = p / scale_;
  }
  return g;
}

}  // namespace switchcert
