#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace skvp {

using Index = Eigen::Index;

/// Quadrature rule for expectations against the standard normal:
/// sum_i w_i phi(x_i) approximates E phi(xi). Weights sum to one.
///
/// Two families:
///  - hermite(order): Gauss-Hermite, exact for polynomials of degree
///    < 2 * order. Nodes come from the Golub-Welsch eigenproblem, are
///    polished by Newton steps on the orthonormal Hermite recurrence, and
///    are symmetrized exactly (x_i = -x_{n-1-i}, weights mirrored). Weights
///    are Christoffel numbers, renormalized to sum to one.
///  - composite(...): Gauss-Legendre panels on [-L, L] weighted by the
///    normal density. Not exact for polynomials, but converges quickly for
///    integrands like tanh(a x + h)^2 whose complex poles sit close to the
///    real axis, where Gauss-Hermite needs hundreds of nodes.
class GaussianQuadrature {
 public:
  static GaussianQuadrature hermite(Index order);
  static GaussianQuadrature composite(double half_width, Index panels, Index nodes_per_panel);
  /// Shared default for smooth non-polynomial integrands: 40 panels of 16
  /// Gauss-Legendre nodes on [-10, 10], about 1e-16 absolute error on
  /// E tanh(sqrt(v) xi + h)^2 for v <= 4.
  static const GaussianQuadrature& standard();

  Index order() const { return nodes_.size(); }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  /// Largest polynomial degree integrated exactly; -1 when none is promised.
  Index exact_degree() const { return exact_degree_; }

 private:
  GaussianQuadrature(Eigen::VectorXd nodes, Eigen::VectorXd weights, Index exact_degree)
      : nodes_(std::move(nodes)), weights_(std::move(weights)), exact_degree_(exact_degree) {}

  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
  Index exact_degree_ = -1;
};

/// E phi(sqrt(variance) xi) for a standard normal xi.
template <class Phi>
double gauss_expect(Phi&& phi, double variance, const GaussianQuadrature& quad) {
  if (!(variance >= 0.0)) throw std::invalid_argument("gauss_expect: variance must be nonnegative");
  const double scale = std::sqrt(variance);
  const auto& x = quad.nodes();
  const auto& w = quad.weights();
  double sum = 0.0;
  for (Index i = 0; i < x.size(); ++i) sum += w(i) * phi(scale * x(i));
  return sum;
}

}  // namespace skvp
