#pragma once

#include <Eigen/Dense>

namespace switchcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned compact box [lo, hi] with lo[i] < hi[i] strictly.
class CompactBox {
 public:
  CompactBox() = default;
  CompactBox(Vec lo, Vec hi);

  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  Eigen::Index dim() const { return lo_.size(); }

  Vec center() const { return 0.5 * (lo_ + hi_); }
  Vec width() const { return hi_ - lo_; }

  bool contains(const Vec& x) const;

  /// Largest Euclidean distance from `p` to any point of the box.
  double max_distance_from(const Vec& p) const;

  /// Box scaled about its center by `factor`.
  CompactBox inflated(double factor) const;

 private:
  Vec lo_;
  Vec hi_;
};

}  // namespace switchcert
