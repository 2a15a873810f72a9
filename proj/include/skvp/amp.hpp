#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "skvp/polynomial.hpp"
#include "skvp/profile.hpp"
#include "skvp/quadrature.hpp"
#include "skvp/sampler.hpp"
#include "skvp/scalar.hpp"

namespace skvp {

/// AMP iterates x^0..x^k. The stored iterates are the unshifted arguments;
/// the estimate of the magnetizations is tanh(x^k + h).
struct AmpTrace {
  std::vector<Eigen::VectorXd> iterates;
  /// onsager_used[l] multiplies tanh(x^{l-1} + h) in the step producing
  /// x^{l+1}; entry 0 is zero (the first step has no correction).
  std::vector<Eigen::VectorXd> onsager_used;
  ModelParams params;
  std::string profile_id;
  std::uint64_t coupling_seed = 0;

  Index k() const { return static_cast<Index>(iterates.size()) - 1; }
  Eigen::VectorXd estimate(Index l) const { return tanh_shifted(iterates.at(static_cast<std::size_t>(l)), params.h); }
};

/// x^0 = 0, x^1 = W tanh(h) 1 and, for l >= 1,
///   x^{l+1} = W tanh(x^l + h) - diag(t S 1 - q^{l+1}) tanh(x^{l-1} + h)
/// with q^l from iterate_q. At every step the coefficient is recomputed as
/// t S E tanh'(X^l) and the two forms must agree to 1e-12 (std::logic_error
/// otherwise). Throws DivergenceError on a non-finite iterate.
AmpTrace amp_run(const CouplingMatrix& w, const VarianceProfile& profile, const ModelParams& params,
                 const GaussianQuadrature& quad, Index k);

struct PolyAmpTrace {
  std::vector<Eigen::VectorXd> iterates;
  Polynomial f;
};

/// z^0 = 0, z^1 = f(0) W 1 and z^{l+1} = W f(z^l) - diag((W.W) f'(z^l)) f(z^{l-1}),
/// where W.W is the entrywise square.
PolyAmpTrace poly_amp_run(const Eigen::MatrixXd& w, const Polynomial& f, Index k);

/// Non-backtracking messages. Entry (j, i) of a level is the message
/// z_{(j),i}, the field at i computed without the edge back to j.
struct NbTrace {
  /// Levels 0..k-1 when requested, otherwise empty.
  std::vector<Eigen::MatrixXd> family;
  /// Level k-1.
  Eigen::MatrixXd last_level;
  /// z^k_i = sum_r W_ir f(z^{k-1}_{(i),r}).
  Eigen::VectorXd final;
};

/// Messages start at zero and follow
///   z^{l+1}_{(j),i} = sum_{r != j} W_ir f(z^l_{(i),r}),
/// computed as the full row sum minus the excluded term, O(n^2) per level
/// with two levels held at a time. Throws CapacityError above n = 2048.
NbTrace nb_run(const Eigen::MatrixXd& w, const Polynomial& f, Index k, bool keep_history = false);

/// (1/n) ||m - tanh(x^k + h)||^2.
double amp_error(const Eigen::VectorXd& m_exact, const AmpTrace& trace, Index k);

/// (1/n) ||a - b||^2.
double normalized_sq_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Long-format CSV with columns l, i, x_l_i.
void write_iterates_csv(std::ostream& os, const std::vector<Eigen::VectorXd>& iterates,
                        const std::vector<std::string>& metadata = {});

}  // namespace skvp
