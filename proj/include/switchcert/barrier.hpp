#pragma once

#include "switchcert/box.hpp"

namespace switchcert {

/// h(x) = prod_i (x_i - lo_i)(hi_i - x_i) / scale with scale = prod_i ((hi_i - lo_i)/2)^2.
/// Zero on the box boundary, positive inside, at most 1 at the center.
class ProductBarrier {
 public:
  ProductBarrier() = default;
  explicit ProductBarrier(CompactBox box);

  const CompactBox& box() const { return box_; }
  double scale() const { return scale_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  /// Interval over-approximations over the box:
  /// sup|grad h| (also the Lipschitz constant of h) and the Lipschitz constant of grad h.
  double gradient_bound() const { return gradient_bound_; }
  double lipschitz() const { return gradient_bound_; }
  double gradient_lipschitz() const { return hessian_bound_; }

 private:
  CompactBox box_;
  double scale_ = 1.0;
  double gradient_bound_ = 0.0;
  double hessian_bound_ = 0.0;
};

}  // namespace switchcert
