#include "switchcert/box.hpp"

#include <cmath>
#include <string>

#include "switchcert/errors.hpp"

namespace switchcert {

CompactBox::CompactBox(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) {
    throw ValidationError("box: lo and hi differ in length");
  }
  if (lo_.size() == 0) {
    throw ValidationError("box: zero-dimensional box");
  }
  for (Eigen::Index i = 0; i < lo_.size(); ++i) {
    if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i]) || !(lo_[i] < hi_[i])) {
      throw ValidationError("box: requires lo < hi in dimension " + std::to_string(i));
    }
  }
}

bool CompactBox::contains(const Vec& x) const {
  if (x.size() != lo_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
  }
  return true;
}

double CompactBox::max_distance_from(const Vec& p) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lo_.size(); ++i) {
    const double d = std::max(std::abs(p[i] - lo_[i]), std::abs(hi_[i] - p[i]));
    s += d * d;
  }
  return std::sqrt(s);
}

CompactBox CompactBox::inflated(double factor) const {
  const Vec c = center();
  const Vec half = 0.5 * factor * width();
  return CompactBox(c - half, c + half);
}

}  // namespace switchcert
