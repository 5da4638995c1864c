#pragma once

#include <string>
#include <vector>

#include "switchcert/box.hpp"
#include "switchcert/config.hpp"

namespace switchcert {

/// Deterministic eps-covers of the state and disturbance boxes.
struct SampleSet {
  std::vector<Vec> states;        // cover of X with radius eps_x
  std::vector<Vec> disturbances;  // cover of W with radius eps_u
  double eps_x = 0.0;
  double eps_u = 0.0;
  double eps = 0.0;  // max(eps_x, eps_u)

  std::size_t pair_count() const { return states.size() * disturbances.size(); }
};

/// Number of cells per dimension used by cover_box.
std::vector<long long> cover_counts(const CompactBox& box, double eps);

/// Cell centers of a uniform grid whose cells have Euclidean half-diagonal at
/// most eps (per-dimension step <= 2 eps / sqrt(n)). Row-major ordering with the
/// lowest dimension varying fastest. Throws ResourceError when more than
/// `max_samples` points would be produced.
std::vector<Vec> cover_box(const CompactBox& box, double eps,
                           std::size_t max_samples = 10'000'000);

SampleSet cover_product(const SwitchedSystemSpec& spec, double eps_x, double eps_u,
                        std::size_t max_samples = 10'000'000);

/// Plain-text cache: header line, dimensions/radii line, then one sample per line.
void save_sample_set(const SampleSet& set, const std::string& path);
SampleSet load_sample_set(const std::string& path);

}  // namespace switchcert
