#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace skvp {

using Index = Eigen::Index;

enum class ProfileKind { kMeanField, kBandedToeplitz, kCirculant, kSparseRandom, kCustom };

const char* to_string(ProfileKind kind);

/// Symmetric nonnegative variance matrix S with zero diagonal, together with
/// its sparsity scale K and the constants witnessed from the data.
///
/// Profiles up to kDenseLimit sites are held as a dense matrix; larger ones
/// switch to row-major compressed storage with both triangles present.
/// Either way a row scan touches only that row. Immutable once built.
class VarianceProfile {
 public:
  static constexpr Index kDenseLimit = 2048;

  /// Builds a profile from the upper-triangle entries (i < j). Entries with
  /// value zero are dropped. Throws std::invalid_argument on a diagonal
  /// entry, a negative or non-finite value, an index out of range, or a
  /// duplicate.
  static VarianceProfile from_upper_triplets(Index n, const std::vector<Eigen::Triplet<double>>& upper,
                                             Index k_scale, ProfileKind kind = ProfileKind::kCustom,
                                             std::string id = {});

  /// Builds a profile from a full matrix. Symmetry, zero diagonal and
  /// nonnegativity are checked exactly.
  static VarianceProfile from_dense(const Eigen::MatrixXd& s, Index k_scale,
                                    ProfileKind kind = ProfileKind::kCustom, std::string id = {});

  Index n() const { return n_; }
  Index k_scale() const { return k_scale_; }
  /// K * max_ij s_ij.
  double c_s() const { return c_s_; }
  /// Max row sum.
  double row_norm() const { return row_norm_; }
  Index max_row_support() const { return max_row_support_; }
  /// ceil(max_row_support / K).
  Index c_card() const;
  double max_entry() const { return max_entry_; }
  ProfileKind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  bool is_dense() const { return std::holds_alternative<Eigen::MatrixXd>(storage_); }

  /// Lag profile psi(0..k) when the profile came from a banded Toeplitz or
  /// circulant builder; empty otherwise.
  const std::vector<double>& psi() const { return psi_; }

  double operator()(Index i, Index j) const;

  /// Calls f(j, s_ij) for every nonzero entry of row i, j ascending.
  template <class F>
  void for_each_in_row(Index i, F&& f) const {
    if (const auto* dense = std::get_if<Eigen::MatrixXd>(&storage_)) {
      for (Index j = 0; j < n_; ++j) {
        const double v = (*dense)(i, j);
        if (v != 0.0) f(j, v);
      }
    } else {
      const auto& sparse = std::get<SparseRows>(storage_);
      for (SparseRows::InnerIterator it(sparse, i); it; ++it) f(it.col(), it.value());
    }
  }

  /// S x.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// x^T S y.
  double bilinear(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  /// S 1, summed in ascending column order.
  const Eigen::VectorXd& row_sums() const { return row_sums_; }
  Eigen::MatrixXd to_dense() const;

 private:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  VarianceProfile() = default;
  void finalize(Index k_scale, ProfileKind kind, std::string id);

  Index n_ = 0;
  std::variant<Eigen::MatrixXd, SparseRows> storage_;
  Index k_scale_ = 1;
  double c_s_ = 0.0;
  double row_norm_ = 0.0;
  double max_entry_ = 0.0;
  Index max_row_support_ = 0;
  Eigen::VectorXd row_sums_;
  ProfileKind kind_ = ProfileKind::kCustom;
  std::string id_;
  std::vector<double> psi_;

  friend VarianceProfile build_banded_toeplitz(Index, const std::vector<double>&, Index, double);
  friend VarianceProfile build_circulant_deformation(const VarianceProfile&);
};

/// Which of the standing assumptions a (profile, t) pair satisfies.
struct AssumptionReport {
  bool ht_ok = false;
  /// log(2) / row_norm - t; +inf for an all-zero profile.
  double ht_margin = 0.0;
  bool card_ok = false;
  bool klogn_ok = false;
  std::vector<std::string> messages;
};

/// Caps applied by validate() to the witnessed constants.
struct AssumptionLimits {
  double c_s = 4.0;
  double c_card = 4.0;
};

/// s_ij = 1/n off the diagonal, K = n.
VarianceProfile build_mean_field(Index n);

/// s_ij = psi(|i - j|) with K = k. `psi` is indexed by lag; psi[0] and every
/// lag above k must be zero and the lags must sum to 1/2 within 1e-12.
/// `declared_c_s`, when positive, also bounds psi(i) <= c_s / k.
VarianceProfile build_banded_toeplitz(Index n, const std::vector<double>& psi, Index k,
                                      double declared_c_s = 0.0);

/// psi(i) = 1/(2k) on lags 1..k.
std::vector<double> uniform_psi(Index k);
/// psi(i) proportional to k + 1 - i on lags 1..k, normalized to sum 1/2.
std::vector<double> triangular_psi(Index k);

/// Circulant symmetric matrix whose first row is
/// [psi(0), ..., psi(k), 0, ..., 0, psi(k), ..., psi(1)]. Requires a banded
/// Toeplitz input with 2k < n. Every row sums to 2 * sum(psi) = 1.
VarianceProfile build_circulant_deformation(const VarianceProfile& toeplitz);

/// Random symmetric graph with every degree at most `degree_cap`, built by a
/// seeded greedy matching, with s_ij = 1 / max(d_i, d_j) on edges so that
/// every row sums to at most 1 (exactly 1 on regular graphs). K = k.
VarianceProfile build_sparse_random(Index n, Index k, Index degree_cap, std::uint64_t seed);

/// Reports, never throws.
AssumptionReport validate(const VarianceProfile& profile, double t, const AssumptionLimits& limits = {});

}  // namespace skvp
