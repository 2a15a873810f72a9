#include "skvp/profile_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "skvp/csv.hpp"

namespace skvp {

namespace {

ProfileKind parse_kind(const std::string& s) {
  if (s == "mean_field") return ProfileKind::kMeanField;
  if (s == "banded_toeplitz") return ProfileKind::kBandedToeplitz;
  if (s == "circulant") return ProfileKind::kCirculant;
  if (s == "sparse_random") return ProfileKind::kSparseRandom;
  throw std::invalid_argument("profile spec: unknown kind '" + s + "'");
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument("profile spec: unknown key '" + item.key() + "'");
}

std::vector<double> lag_vector(const ProfileSpec& spec) {
  if (!spec.psi.empty()) {
    if (static_cast<Index>(spec.psi.size()) > spec.k)
      throw std::invalid_argument("profile spec: psi lists more than k lags");
    std::vector<double> psi(spec.psi.size() + 1, 0.0);
    std::copy(spec.psi.begin(), spec.psi.end(), psi.begin() + 1);
    return psi;
  }
  if (spec.shape == "uniform") return uniform_psi(spec.k);
  if (spec.shape == "triangular") return triangular_psi(spec.k);
  throw std::invalid_argument("profile spec: unknown shape '" + spec.shape + "'");
}

}  // namespace

ProfileSpec parse_profile_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("profile spec: expected an object");
  if (!j.contains("kind")) throw std::invalid_argument("profile spec: missing 'kind'");
  ProfileSpec spec;
  spec.kind = parse_kind(j.at("kind").get<std::string>());
  switch (spec.kind) {
    case ProfileKind::kMeanField:
      check_keys(j, {"kind", "n"});
      break;
    case ProfileKind::kBandedToeplitz:
    case ProfileKind::kCirculant:
      check_keys(j, {"kind", "n", "k", "shape", "psi"});
      break;
    case ProfileKind::kSparseRandom:
      check_keys(j, {"kind", "n", "k", "degree_cap", "degree_factor", "seed"});
      break;
    case ProfileKind::kCustom:
      break;
  }
  if (j.contains("n")) spec.n = j.at("n").get<Index>();
  if (j.contains("k")) spec.k = j.at("k").get<Index>();
  if (j.contains("shape")) spec.shape = j.at("shape").get<std::string>();
  if (j.contains("psi")) spec.psi = j.at("psi").get<std::vector<double>>();
  if (j.contains("degree_cap")) spec.degree_cap = j.at("degree_cap").get<Index>();
  if (j.contains("degree_factor")) spec.degree_factor = j.at("degree_factor").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

nlohmann::json to_json(const ProfileSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  if (spec.n > 0) j["n"] = spec.n;
  switch (spec.kind) {
    case ProfileKind::kBandedToeplitz:
    case ProfileKind::kCirculant:
      if (spec.k > 0) j["k"] = spec.k;
      if (spec.psi.empty()) {
        j["shape"] = spec.shape;
      } else {
        j["psi"] = spec.psi;
      }
      break;
    case ProfileKind::kSparseRandom:
      if (spec.k > 0) j["k"] = spec.k;
      if (spec.degree_cap > 0) {
        j["degree_cap"] = spec.degree_cap;
      } else {
        j["degree_factor"] = spec.degree_factor;
      }
      j["seed"] = spec.seed;
      break;
    default:
      break;
  }
  return j;
}

ProfileSpec with_size(ProfileSpec spec, Index n, Index k) {
  spec.n = n;
  if (k > 0) spec.k = k;
  return spec;
}

VarianceProfile build_profile(const ProfileSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("profile spec: n must be set and positive");
  switch (spec.kind) {
    case ProfileKind::kMeanField:
      return build_mean_field(spec.n);
    case ProfileKind::kBandedToeplitz:
      return build_banded_toeplitz(spec.n, lag_vector(spec), spec.k);
    case ProfileKind::kCirculant:
      return build_circulant_deformation(build_banded_toeplitz(spec.n, lag_vector(spec), spec.k));
    case ProfileKind::kSparseRandom: {
      if (spec.k < 1) throw std::invalid_argument("profile spec: sparse_random needs k");
      Index cap = spec.degree_cap;
      if (cap <= 0) cap = static_cast<Index>(std::llround(spec.degree_factor * static_cast<double>(spec.k)));
      cap = std::clamp<Index>(cap, 1, spec.n - 1);
      return build_sparse_random(spec.n, spec.k, cap, spec.seed);
    }
    case ProfileKind::kCustom:
      break;
  }
  throw std::invalid_argument("profile spec: custom profiles are imported from triplets");
}

void write_profile_triplets(std::ostream& os, const VarianceProfile& profile) {
  CsvTable table;
  table.metadata = {"n=" + std::to_string(profile.n()), "k_scale=" + std::to_string(profile.k_scale()),
                    "kind=" + std::string(to_string(profile.kind()))};
  table.header = {"i", "j", "s_ij"};
  for (Index i = 0; i < profile.n(); ++i)
    profile.for_each_in_row(i, [&](Index j, double v) {
      if (j > i) table.add_row({std::to_string(i), std::to_string(j), format_double(v)});
    });
  table.write(os);
}

VarianceProfile read_profile_triplets(std::istream& is) {
  const ParsedCsv csv = read_csv(is);
  if (!csv.meta.count("n") || !csv.meta.count("k_scale"))
    throw std::invalid_argument("profile triplets: missing '# n=' or '# k_scale=' metadata");
  const Index n = std::stoll(csv.meta.at("n"));
  const Index k = std::stoll(csv.meta.at("k_scale"));
  std::vector<Eigen::Triplet<double>> upper;
  upper.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    if (row.size() != 3) throw std::invalid_argument("profile triplets: expected 3 columns");
    const Index i = std::stoll(row[0]);
    const Index j = std::stoll(row[1]);
    if (i >= j) throw std::invalid_argument("profile triplets: rows must satisfy i < j");
    upper.emplace_back(i, j, std::stod(row[2]));
  }
  return VarianceProfile::from_upper_triplets(n, upper, k, ProfileKind::kCustom);
}

}  // namespace skvp
