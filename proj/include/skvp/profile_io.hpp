#pragma once

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "skvp/profile.hpp"

namespace skvp {

/// Declarative description of a profile, as read from a config document:
///
///   {"kind": "mean_field", "n": 16}
///   {"kind": "banded_toeplitz", "n": 64, "k": 8, "shape": "uniform"}
///   {"kind": "circulant", "n": 64, "k": 8, "psi": [ ... lags 1..k ... ]}
///   {"kind": "sparse_random", "n": 256, "k": 16, "degree_cap": 32, "seed": 7}
///
/// Unknown keys are rejected. `n` and `k` may be left out when an experiment
/// supplies them per cell.
struct ProfileSpec {
  ProfileKind kind = ProfileKind::kMeanField;
  Index n = 0;
  Index k = 0;
  std::string shape = "uniform";
  std::vector<double> psi;  // lags 1..k; overrides `shape` when nonempty
  Index degree_cap = 0;     // sparse_random; 0 means degree_factor * k
  double degree_factor = 1.0;
  std::uint64_t seed = 0;
};

ProfileSpec parse_profile_spec(const nlohmann::json& j);
nlohmann::json to_json(const ProfileSpec& spec);

/// Returns a copy with n (and k when positive) replaced.
ProfileSpec with_size(ProfileSpec spec, Index n, Index k = 0);

VarianceProfile build_profile(const ProfileSpec& spec);

/// Triplet CSV (i, j, s_ij) for i < j, lexicographic, preceded by `# n=`
/// and `# k_scale=` metadata lines.
void write_profile_triplets(std::ostream& os, const VarianceProfile& profile);
VarianceProfile read_profile_triplets(std::istream& is);

}  // namespace skvp
