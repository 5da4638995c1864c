#include "switchcert/cover.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "switchcert/errors.hpp"

namespace switchcert {

std::vector<long long> cover_counts(const CompactBox& box, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("cover: eps must be positive");
  const double step = 2.0 * eps / std::sqrt(static_cast<double>(box.dim()));
  std::vector<long long> counts;
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    const double w = box.hi()[i] - box.lo()[i];
    auto k = static_cast<long long>(std::ceil(w / step));
    if (k < 1) k = 1;
    if (w / static_cast<double>(k) > step) ++k;  // guard against rounding below the true ratio
    counts.push_back(k);
  }
  return counts;
}

std::vector<Vec> cover_box(const CompactBox& box, double eps, std::size_t max_samples) {
  const auto counts = cover_counts(box, eps);
  double total = 1.0;
  for (long long k : counts) total *= static_cast<double>(k);
  if (total > static_cast<double>(max_samples)) {
    const std::size_t required =
        total >= 1.8e19 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(total);
    throw ResourceError("cover: eps " + std::to_string(eps) + " needs " +
                            std::to_string(required) + " samples, cap is " +
                            std::to_string(max_samples),
                        required);
  }
  const Eigen::Index n = box.dim();
  const auto count = static_cast<std::size_t>(total);
  std::vector<Vec> out;
  out.reserve(count);
  std::vector<long long> idx(n, 0);
  Vec cell(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cell[i] = (box.hi()[i] - box.lo()[i]) / static_cast<double>(counts[i]);
  }
  for (std::size_t s = 0; s < count; ++s) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = box.lo()[i] + (static_cast<double>(idx[i]) + 0.5) * cell[i];
    }
    out.push_back(std::move(x));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

SampleSet cover_product(const SwitchedSystemSpec& spec, double eps_x, double eps_u,
                        std::size_t max_samples) {
  SampleSet set;
  set.states = cover_box(spec.state_box, eps_x, max_samples);
  set.disturbances = cover_box(spec.dist_box, eps_u, max_samples);
  set.eps_x = eps_x;
  set.eps_u = eps_u;
  set.eps = std::max(eps_x, eps_u);
  return set;
}

void save_sample_set(const SampleSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cover: cannot write '" + path + "'", 0);
  const auto dim = [](const std::vector<Vec>& v) { return v.empty() ? 0 : v.front().size(); };
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "switchcert-samples 1\n";
  out << dim(set.states) << ' ' << dim(set.disturbances) << ' ' << set.states.size() << ' '
      << set.disturbances.size() << ' ' << num(set.eps_x) << ' ' << num(set.eps_u) << '\n';
  for (const auto* list : {&set.states, &set.disturbances}) {
    for (const Vec& v : *list) {
      for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << num(v[i]);
      out << '\n';
    }
  }
}

SampleSet load_sample_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cover: cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "switchcert-samples" || version != 1) {
    throw ConfigError("cover: '" + path + "' is not a sample cache");
  }
  long long n = 0, r = 0, count_x = 0, count_w = 0;
  SampleSet set;
  in >> n >> r >> count_x >> count_w >> set.eps_x >> set.eps_u;
  if (!in || n <= 0 || r <= 0 || count_x <= 0 || count_w <= 0) {
    throw ConfigError("cover: malformed header in '" + path + "'");
  }
  set.eps = std::max(set.eps_x, set.eps_u);
  auto read = [&](long long count, long long d, std::vector<Vec>& dst) {
    for (long long s = 0; s < count; ++s) {
      Vec v(d);
      for (long long i = 0; i < d; ++i) in >> v[i];
      dst.push_back(std::move(v));
    }
  };
  read(count_x, n, set.states);
  read(count_w, r, set.disturbances);
  if (!in) throw ConfigError("cover: truncated sample cache '" + path + "'");
  return set;
}

}  // namespace switchcert
