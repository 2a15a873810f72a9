#include "skvp/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "skvp/rng.hpp"

namespace skvp {

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kMeanField: return "mean_field";
    case ProfileKind::kBandedToeplitz: return "banded_toeplitz";
    case ProfileKind::kCirculant: return "circulant";
    case ProfileKind::kSparseRandom: return "sparse_random";
    case ProfileKind::kCustom: return "custom";
  }
  return "custom";
}

namespace {

void check_entry(Index n, Index i, Index j, double v) {
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw std::invalid_argument("variance profile: index out of range");
  if (i == j) throw std::invalid_argument("variance profile: diagonal entries must be zero");
  if (!std::isfinite(v) || v < 0.0)
    throw std::invalid_argument("variance profile: entries must be finite and nonnegative");
}

}  // namespace

VarianceProfile VarianceProfile::from_upper_triplets(Index n, const std::vector<Eigen::Triplet<double>>& upper,
                                                     Index k_scale, ProfileKind kind, std::string id) {
  if (n < 1) throw std::invalid_argument("variance profile: n must be positive");
  VarianceProfile p;
  p.n_ = n;
  if (n <= kDenseLimit) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : upper) {
      const Index i = std::min(e.row(), e.col());
      const Index j = std::max(e.row(), e.col());
      check_entry(n, i, j, e.value());
      if (e.value() == 0.0) continue;
      if (s(i, j) != 0.0) throw std::invalid_argument("variance profile: duplicate entry");
      s(i, j) = e.value();
      s(j, i) = e.value();
    }
    p.storage_ = std::move(s);
  } else {
    std::vector<Eigen::Triplet<double>> both;
    both.reserve(2 * upper.size());
    std::vector<std::pair<Index, Index>> seen;
    seen.reserve(upper.size());
    for (const auto& e : upper) {
      const Index i = std::min(e.row(), e.col());
      const Index j = std::max(e.row(), e.col());
      check_entry(n, i, j, e.value());
      if (e.value() == 0.0) continue;
      seen.emplace_back(i, j);
      both.emplace_back(i, j, e.value());
      both.emplace_back(j, i, e.value());
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw std::invalid_argument("variance profile: duplicate entry");
    SparseRows s(n, n);
    s.setFromTriplets(both.begin(), both.end());
    s.makeCompressed();
    p.storage_ = std::move(s);
  }
  p.finalize(k_scale, kind, std::move(id));
  return p;
}

VarianceProfile VarianceProfile::from_dense(const Eigen::MatrixXd& s, Index k_scale, ProfileKind kind,
                                            std::string id) {
  const Index n = s.rows();
  if (n < 1 || s.cols() != n) throw std::invalid_argument("variance profile: matrix must be square and nonempty");
  for (Index i = 0; i < n; ++i) {
    if (s(i, i) != 0.0) throw std::invalid_argument("variance profile: diagonal entries must be zero");
    for (Index j = i + 1; j < n; ++j) {
      check_entry(n, i, j, s(i, j));
      if (s(i, j) != s(j, i)) throw std::invalid_argument("variance profile: matrix is not symmetric");
    }
  }
  if (n <= kDenseLimit) {
    VarianceProfile p;
    p.n_ = n;
    p.storage_ = s;
    p.finalize(k_scale, kind, std::move(id));
    return p;
  }
  std::vector<Eigen::Triplet<double>> upper;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (s(i, j) != 0.0) upper.emplace_back(i, j, s(i, j));
  return from_upper_triplets(n, upper, k_scale, kind, std::move(id));
}

void VarianceProfile::finalize(Index k_scale, ProfileKind kind, std::string id) {
  if (k_scale < 1) throw std::invalid_argument("variance profile: k_scale must be positive");
  k_scale_ = k_scale;
  kind_ = kind;
  id_ = id.empty() ? std::string(to_string(kind)) + "_n" + std::to_string(n_) : std::move(id);
  row_sums_ = Eigen::VectorXd::Zero(n_);
  max_entry_ = 0.0;
  max_row_support_ = 0;
  for (Index i = 0; i < n_; ++i) {
    double sum = 0.0;
    Index support = 0;
    for_each_in_row(i, [&](Index, double v) {
      sum += v;
      ++support;
      max_entry_ = std::max(max_entry_, v);
    });
    row_sums_(i) = sum;
    max_row_support_ = std::max(max_row_support_, support);
  }
  row_norm_ = row_sums_.maxCoeff();
  c_s_ = static_cast<double>(k_scale_) * max_entry_;
}

Index VarianceProfile::c_card() const { return (max_row_support_ + k_scale_ - 1) / k_scale_; }

double VarianceProfile::operator()(Index i, Index j) const {
  if (const auto* dense = std::get_if<Eigen::MatrixXd>(&storage_)) return (*dense)(i, j);
  return std::get<SparseRows>(storage_).coeff(i, j);
}

Eigen::VectorXd VarianceProfile::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("VarianceProfile::apply: size mismatch");
  if (const auto* dense = std::get_if<Eigen::MatrixXd>(&storage_)) return (*dense) * x;
  return std::get<SparseRows>(storage_) * x;
}

double VarianceProfile::bilinear(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return x.dot(apply(y));
}

Eigen::MatrixXd VarianceProfile::to_dense() const {
  if (const auto* dense = std::get_if<Eigen::MatrixXd>(&storage_)) return *dense;
  return Eigen::MatrixXd(std::get<SparseRows>(storage_));
}

VarianceProfile build_mean_field(Index n) {
  if (n < 1) throw std::invalid_argument("build_mean_field: n must be positive");
  const double v = 1.0 / static_cast<double>(n);
  if (n <= VarianceProfile::kDenseLimit) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n, n, v);
    s.diagonal().setZero();
    return VarianceProfile::from_dense(s, n, ProfileKind::kMeanField);
  }
  std::vector<Eigen::Triplet<double>> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) upper.emplace_back(i, j, v);
  return VarianceProfile::from_upper_triplets(n, upper, n, ProfileKind::kMeanField);
}

std::vector<double> uniform_psi(Index k) {
  if (k < 1) throw std::invalid_argument("uniform_psi: k must be positive");
  std::vector<double> psi(static_cast<std::size_t>(k) + 1, 1.0 / (2.0 * static_cast<double>(k)));
  psi[0] = 0.0;
  return psi;
}

std::vector<double> triangular_psi(Index k) {
  if (k < 1) throw std::invalid_argument("triangular_psi: k must be positive");
  // sum_{i=1}^k (k + 1 - i) = k (k + 1) / 2
  const double norm = static_cast<double>(k) * static_cast<double>(k + 1);
  std::vector<double> psi(static_cast<std::size_t>(k) + 1, 0.0);
  for (Index i = 1; i <= k; ++i) psi[static_cast<std::size_t>(i)] = static_cast<double>(k + 1 - i) / norm;
  return psi;
}

VarianceProfile build_banded_toeplitz(Index n, const std::vector<double>& psi, Index k, double declared_c_s) {
  if (k < 1 || k >= n) throw std::invalid_argument("build_banded_toeplitz: need 1 <= k < n");
  double total = 0.0;
  for (std::size_t lag = 0; lag < psi.size(); ++lag) {
    const double v = psi[lag];
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("build_banded_toeplitz: psi must be finite and nonnegative");
    if (v != 0.0 && (lag == 0 || static_cast<Index>(lag) > k)) {
      std::ostringstream os;
      os << "build_banded_toeplitz: psi has support at lag " << lag << " outside [1, " << k << "]";
      throw std::invalid_argument(os.str());
    }
    if (declared_c_s > 0.0 && v > declared_c_s / static_cast<double>(k))
      throw std::invalid_argument("build_banded_toeplitz: psi exceeds c_s / k");
    total += v;
  }
  if (std::fabs(total - 0.5) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "build_banded_toeplitz: psi sums to " << total << ", expected 1/2";
    throw std::invalid_argument(os.str());
  }
  std::vector<double> lags(static_cast<std::size_t>(k) + 1, 0.0);
  std::copy_n(psi.begin(), std::min(psi.size(), lags.size()), lags.begin());

  std::vector<Eigen::Triplet<double>> upper;
  for (Index i = 0; i < n; ++i)
    for (Index d = 1; d <= k && i + d < n; ++d)
      if (lags[static_cast<std::size_t>(d)] != 0.0) upper.emplace_back(i, i + d, lags[static_cast<std::size_t>(d)]);
  auto p = VarianceProfile::from_upper_triplets(n, upper, k, ProfileKind::kBandedToeplitz,
                                                "banded_toeplitz_n" + std::to_string(n) + "_k" + std::to_string(k));
  p.psi_ = std::move(lags);
  return p;
}

VarianceProfile build_circulant_deformation(const VarianceProfile& toeplitz) {
  if (toeplitz.kind() != ProfileKind::kBandedToeplitz || toeplitz.psi().empty())
    throw std::invalid_argument("build_circulant_deformation: input must be a banded Toeplitz profile");
  const Index n = toeplitz.n();
  const Index k = toeplitz.k_scale();
  if (2 * k >= n) throw std::invalid_argument("build_circulant_deformation: need 2k < n");
  const auto& psi = toeplitz.psi();

  std::vector<Eigen::Triplet<double>> upper;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const Index d = j - i;
      double v = 0.0;
      if (d <= k) {
        v = psi[static_cast<std::size_t>(d)];
      } else if (d >= n - k) {
        v = psi[static_cast<std::size_t>(n - d)];
      }
      if (v != 0.0) upper.emplace_back(i, j, v);
    }
  }
  auto p = VarianceProfile::from_upper_triplets(n, upper, k, ProfileKind::kCirculant,
                                                "circulant_n" + std::to_string(n) + "_k" + std::to_string(k));
  p.psi_ = psi;
  return p;
}

VarianceProfile build_sparse_random(Index n, Index k, Index degree_cap, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("build_sparse_random: n must be at least 2");
  if (k < 1) throw std::invalid_argument("build_sparse_random: k must be positive");
  if (degree_cap < 1 || degree_cap > n - 1)
    throw std::invalid_argument("build_sparse_random: degree_cap must lie in [1, n - 1]");

  RandomStream rng(seed, StreamTag::kGraph, 0);
  auto shuffle = [&rng](std::vector<Index>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  shuffle(order);

  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(n));
  std::vector<char> linked(static_cast<std::size_t>(n));
  std::vector<Index> candidates;
  for (const Index i : order) {
    auto& di = degree[static_cast<std::size_t>(i)];
    if (di >= degree_cap) continue;
    std::fill(linked.begin(), linked.end(), 0);
    for (const Index j : adjacency[static_cast<std::size_t>(i)]) linked[static_cast<std::size_t>(j)] = 1;
    candidates.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i && !linked[static_cast<std::size_t>(j)] && degree[static_cast<std::size_t>(j)] < degree_cap)
        candidates.push_back(j);
    shuffle(candidates);
    for (const Index j : candidates) {
      if (di >= degree_cap) break;
      adjacency[static_cast<std::size_t>(i)].push_back(j);
      adjacency[static_cast<std::size_t>(j)].push_back(i);
      ++di;
      ++degree[static_cast<std::size_t>(j)];
    }
  }

  std::vector<Eigen::Triplet<double>> upper;
  for (Index i = 0; i < n; ++i) {
    for (const Index j : adjacency[static_cast<std::size_t>(i)]) {
      if (j <= i) continue;
      const auto d = std::max(degree[static_cast<std::size_t>(i)], degree[static_cast<std::size_t>(j)]);
      upper.emplace_back(i, j, 1.0 / static_cast<double>(d));
    }
  }
  return VarianceProfile::from_upper_triplets(
      n, upper, k, ProfileKind::kSparseRandom,
      "sparse_random_n" + std::to_string(n) + "_k" + std::to_string(k) + "_d" + std::to_string(degree_cap) + "_s" +
          std::to_string(seed));
}

AssumptionReport validate(const VarianceProfile& profile, double t, const AssumptionLimits& limits) {
  AssumptionReport r;
  const double row = profile.row_norm();
  r.ht_ok = t < std::log(2.0) / row;
  r.ht_margin = row > 0.0 ? std::log(2.0) / row - t : std::numeric_limits<double>::infinity();
  r.klogn_ok = static_cast<double>(profile.k_scale()) >= std::log(static_cast<double>(profile.n()));
  const bool cs_ok = profile.c_s() <= limits.c_s;
  const bool card_ok = static_cast<double>(profile.c_card()) <= limits.c_card;
  r.card_ok = cs_ok && card_ok;

  std::ostringstream os;
  os.precision(6);
  if (!r.ht_ok) {
    os << "high-temperature condition fails: t = " << t << " >= log(2)/row_norm = " << std::log(2.0) / row;
    r.messages.push_back(os.str());
    os.str({});
  }
  if (!cs_ok) {
    os << "c_s = " << profile.c_s() << " exceeds limit " << limits.c_s;
    r.messages.push_back(os.str());
    os.str({});
  }
  if (!card_ok) {
    os << "c_card = " << profile.c_card() << " exceeds limit " << limits.c_card;
    r.messages.push_back(os.str());
    os.str({});
  }
  if (!r.klogn_ok) {
    os << "K = " << profile.k_scale() << " < log(n) = " << std::log(static_cast<double>(profile.n()));
    r.messages.push_back(os.str());
  }
  return r;
}

}  // namespace skvp
