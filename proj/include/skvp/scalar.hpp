#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "skvp/profile.hpp"
#include "skvp/quadrature.hpp"

namespace skvp {

/// Disorder scale t and external field h.
struct ModelParams {
  double t = 0.0;
  double h = 0.0;

  /// Throws std::invalid_argument unless t > 0 and both are finite.
  void check() const;
};

/// tanh(x + h).
inline double tanh_shifted(double x, double h) { return std::tanh(x + h); }

/// Element-wise tanh(x + h).
template <class Derived>
Eigen::VectorXd tanh_shifted(const Eigen::MatrixBase<Derived>& x, double h) {
  return x.unaryExpr([h](double v) { return std::tanh(v + h); });
}

/// g(x) = E tanh(sqrt(x) xi + h)^2, for x >= 0.
double g_func(double x, const ModelParams& params, const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// g applied entrywise. Equal entries are evaluated once per call.
Eigen::VectorXd g_vector(const Eigen::VectorXd& q, const ModelParams& params,
                         const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// E tanh'(sqrt(x) xi + h), evaluated as E sech^2 directly rather than as
/// 1 - g(x).
double tanh_derivative_mean(double x, const ModelParams& params,
                            const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// Iterates of q <- t S g(q) and, when solved, the fixed point.
struct StateEvolution {
  std::vector<Eigen::VectorXd> q_iterates;
  std::optional<Eigen::VectorXd> q_star;
  /// ||q - t S g(q)||_inf at the last iterate.
  double residual = 0.0;
  bool converged = false;
  Index iterations = 0;
};

struct FixedPointOptions {
  double tol = 1e-12;
  Index max_iter = 100000;
  /// Starting vector; zero when absent.
  std::optional<Eigen::VectorXd> start;
  /// Run even when t violates the high-temperature condition.
  bool allow_above_ht = false;
  /// Keep every iterate in q_iterates (otherwise only the start and the end).
  bool keep_history = false;
};

/// t S g(q).
Eigen::VectorXd state_evolution_map(const VarianceProfile& profile, const ModelParams& params,
                                    const Eigen::VectorXd& q,
                                    const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// Solves q = t S g(q) by fixed-point iteration.
///
/// Throws std::invalid_argument if the high-temperature condition fails and
/// allow_above_ht is unset. Running out of iterations is not an error: the
/// result has converged = false and carries the last iterate in q_star.
StateEvolution solve_fixed_point(const VarianceProfile& profile, const ModelParams& params,
                                 const GaussianQuadrature& quad = GaussianQuadrature::standard(),
                                 const FixedPointOptions& options = {});

/// q^0 = 0, ..., q^k.
StateEvolution iterate_q(const VarianceProfile& profile, const ModelParams& params, const GaussianQuadrature& quad,
                         Index k);

/// Onsager coefficient t S 1 - q^{l+1}. Rejects pairs with
/// ||q^{l+1} - t S g(q^l)||_inf > 1e-9.
Eigen::VectorXd onsager_coeff(const VarianceProfile& profile, const ModelParams& params, const Eigen::VectorXd& q_l,
                              const Eigen::VectorXd& q_lplus1,
                              const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// The same coefficient computed as t S E tanh'(X^l), X^l ~ N(0, diag(q^l)).
Eigen::VectorXd onsager_coeff_derivative_form(const VarianceProfile& profile, const ModelParams& params,
                                              const Eigen::VectorXd& q_l,
                                              const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// Scalar root of q = t_eff g(q) on [0, t_eff] by bisection.
double scalar_fixed_point(double t_eff, double h, const GaussianQuadrature& quad = GaussianQuadrature::standard(),
                          double tol = 1e-12);

}  // namespace skvp
