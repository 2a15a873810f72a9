#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>

#include "skvp/profile.hpp"

namespace skvp {

/// One disorder realization W with W_ij ~ N(0, t s_ij), symmetric, zero
/// diagonal, and exactly zero wherever s_ij = 0.
struct CouplingMatrix {
  Eigen::MatrixXd w;
  double t = 0.0;
  std::string profile_id;
  std::uint64_t seed = 0;

  Index n() const { return w.rows(); }
};

/// eta ~ N(0, diag(q)).
struct GaussianField {
  Eigen::VectorXd eta;
  Eigen::VectorXd q_used;
};

struct SpectralBoundReport {
  double norm_estimate = 0.0;
  /// (1+d)(2 ||tS||_row^{1/2} + 6/sqrt(log(1+d)) (max_ij t s_ij log n)^{1/2}).
  double bound_t = 0.0;
  /// Same bound with max_ij s_ij (no t) in the second term.
  double bound_t_untempered = 0.0;
  double delta = 0.0;
  bool within_bound = false;
  bool converged = false;
  Index iterations = 0;
};

/// The underlying GOE draw X (off-diagonal N(0, 1), zero diagonal) for a
/// seed. Row i of the upper triangle comes from stream (seed, coupling, i).
Eigen::MatrixXd sample_goe(Index n, std::uint64_t seed);

/// W = (t S)^{1/2} (entrywise) times the GOE draw for `seed`. Deterministic.
CouplingMatrix sample_coupling(const VarianceProfile& profile, double t, std::uint64_t seed);

/// Two realizations sharing one GOE draw. Throws std::invalid_argument when
/// the profiles have different sizes.
std::pair<CouplingMatrix, CouplingMatrix> sample_coupling_pair(const VarianceProfile& first,
                                                               const VarianceProfile& second, double t,
                                                               std::uint64_t seed);

/// Independent eta_i ~ N(0, q_i) from stream (seed, field, 0). Rejects
/// negative variances.
GaussianField sample_field(const Eigen::VectorXd& q, std::uint64_t seed);

struct PowerIterationResult {
  double norm = 0.0;
  bool converged = false;
  Index iterations = 0;
};

/// ||A|| for a symmetric A by power iteration on ||A v||, started from the
/// alternating-sign vector. Stops when successive estimates agree to
/// tol * max(1, estimate).
template <class Derived>
PowerIterationResult symmetric_norm(const Eigen::MatrixBase<Derived>& a, double tol = 1e-9,
                                    Index max_iter = 10000) {
  const Index n = a.rows();
  PowerIterationResult r;
  if (n == 0) {
    r.converged = true;
    return r;
  }
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = (i % 2 == 0) ? 1.0 : -1.0;
  v /= std::sqrt(static_cast<double>(n));
  double previous = -1.0;
  for (Index it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd av = a * v;
    const double estimate = av.norm();
    r.iterations = it;
    r.norm = estimate;
    if (estimate == 0.0 || std::abs(estimate - previous) <= tol * std::max(1.0, estimate)) {
      r.converged = true;
      return r;
    }
    previous = estimate;
    v = av / estimate;
  }
  return r;
}

/// Spectral norm of W against the bound T for 0 < delta <= 1/2.
SpectralBoundReport spectral_report(const CouplingMatrix& w, const VarianceProfile& profile, double delta);

/// Triplet CSV (i, j, w_ij) for i < j, with `# n=`, `# t=`, `# seed=` and
/// `# profile_id=` metadata. Zero entries are omitted.
void write_coupling_triplets(std::ostream& os, const CouplingMatrix& w);
CouplingMatrix read_coupling_triplets(std::istream& is);

}  // namespace skvp
