#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "skvp/profile.hpp"

namespace skvp {

/// Vector of +-1 spins. Bit i of the integer encoding is set when spin i is +1.
struct SpinConfiguration {
  Eigen::VectorXd spins;

  static SpinConfiguration from_bits(std::uint64_t bits, Index n);
  std::uint64_t to_bits() const;
  Index n() const { return spins.size(); }
};

/// Interpolated spin system with Hamiltonian
///   H_u(s) = (sqrt(u)/2) s^T W s + h <s, 1> + sqrt(1-u) <s, eta>.
/// At u = 1 the field eta is unused and may be empty.
struct SpinSystem {
  Eigen::MatrixXd w;
  double h = 0.0;
  double u = 1.0;
  Eigen::VectorXd eta;

  Index n() const { return w.rows(); }
  /// Throws std::invalid_argument on u outside [0, 1], a missing eta with
  /// u < 1, or a W that is not symmetric with zero diagonal.
  void check() const;
  /// The system with only the listed sites kept (rows and columns of W and
  /// entries of eta), in the given order.
  SpinSystem restricted(std::span<const Index> keep) const;
};

double hamiltonian(const SpinSystem& system, const SpinConfiguration& sigma);

/// Gibbs means and covariances m_ij = <s_i s_j> - m_i m_j.
struct GibbsStats {
  Eigen::VectorXd m;
  Eigen::MatrixXd cov;
};

/// R12 = t S (s1 * s2) for one replica pair.
struct OverlapSample {
  Eigen::VectorXd r12;
};

struct EnumerationOptions {
  /// Worker threads for the enumeration passes. One thread walks the whole
  /// space in a single Gray-code sweep; more threads split it by the high
  /// spins and merge partial sums in block order.
  int jobs = 1;
};

/// Exact Gibbs measure by enumeration of all 2^n configurations.
///
/// Configurations are visited in pairs (s, -s): a Gray-code walk over spins
/// 0..n-2 with spin n-1 pinned to +1, each state paired with its global
/// flip. Energies are updated incrementally (O(n) per step, with a full
/// recomputation every 4096 steps) and log Z is accumulated as a running
/// log-sum-exp. This summation order is fixed; flipping (h, eta) to
/// (-h, -eta) negates the magnetizations bit for bit.
class ExactGibbs {
 public:
  static constexpr Index kEnumerationCap = 24;

  /// Throws CapacityError when n exceeds kEnumerationCap.
  explicit ExactGibbs(SpinSystem system, EnumerationOptions options = {});

  const SpinSystem& system() const { return system_; }
  double log_z() const { return log_z_; }

  /// Magnetizations only, O(n) per configuration.
  Eigen::VectorXd magnetizations() const;
  /// Magnetizations and covariances, O(n^2) per configuration.
  GibbsStats stats() const;

  /// i.i.d. draws by inverse CDF. Configurations are ordered by their integer
  /// encoding, ascending; uniforms come from stream (seed, replica, 0).
  std::vector<SpinConfiguration> sample_replicas(Index count, std::uint64_t seed) const;

 private:
  SpinSystem system_;
  EnumerationOptions options_;
  double log_z_ = 0.0;
};

double log_partition(const SpinSystem& system, EnumerationOptions options = {});
GibbsStats stats(const SpinSystem& system, EnumerationOptions options = {});

/// Stats of the system with the sites in `removed` deleted, embedded back
/// into length n with zeros at the removed sites.
GibbsStats cavity_stats(const SpinSystem& system, std::span<const Index> removed, EnumerationOptions options = {});

std::vector<SpinConfiguration> sample_replicas(const SpinSystem& system, Index count, std::uint64_t seed);

OverlapSample overlap(const VarianceProfile& profile, double t, const SpinConfiguration& sigma1,
                      const SpinConfiguration& sigma2);

/// Single-site cavity diagnostics.
struct CavityAnalysis {
  /// m_i - tanh(sqrt(u) sum_k W_ik m_(i),k + sqrt(1-u) eta_i + h).
  Eigen::VectorXd tap_residual;
  /// Entry (i, l) = (m_l - m_(i),l)^2 for l != i; zero on the diagonal.
  Eigen::MatrixXd cavity_shift;
  Eigen::VectorXd m;
};

/// Runs the full system and all n single-site cavities (cost n 2^{n-1}).
CavityAnalysis cavity_analysis(const SpinSystem& system, EnumerationOptions options = {});

/// The TAP residual vector of cavity_analysis.
Eigen::VectorXd tap_residual(const SpinSystem& system, EnumerationOptions options = {});

struct GlauberOptions {
  Index sweeps = 0;
  Index burn_in = 1000;
  Index thin = 1;
};

/// Heat-bath chain: each sweep updates sites 0..n-1 in order, setting spin i
/// to +1 with probability (1 + tanh(local field))/2. The start state and all
/// uniforms come from stream (seed, glauber, 0). Returns the configuration
/// after every thin-th sweep past burn_in. Requires sweeps > burn_in >= 0.
/// No mixing guarantee; burn_in is a heuristic.
std::vector<SpinConfiguration> glauber_chain(const SpinSystem& system, const GlauberOptions& options,
                                             std::uint64_t seed);

/// Running mean of the spins along the same chain, without storing it.
Eigen::VectorXd glauber_magnetization(const SpinSystem& system, const GlauberOptions& options, std::uint64_t seed);

}  // namespace skvp
