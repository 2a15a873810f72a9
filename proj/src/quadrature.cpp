#include "skvp/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <numbers>

namespace skvp {

namespace {

// Orthonormal probabilists' Hermite polynomials p_0..p_{order}, evaluated
// at x. Returns p_order and p_{order-1}; also accumulates sum_{k<order} p_k^2.
struct HermiteValues {
  double p_n;
  double p_nm1;
  double christoffel_sum;
};

HermiteValues hermite_values(Index order, double x) {
  double prev = 0.0;
  double cur = 1.0;
  double sum = 0.0;
  for (Index k = 0; k < order; ++k) {
    sum += cur * cur;
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  return {cur, prev, sum};
}

}  // namespace

GaussianQuadrature GaussianQuadrature::hermite(Index order) {
  if (order < 1) throw std::invalid_argument("GaussianQuadrature: order must be positive");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (Index k = 1; k < order; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  Eigen::VectorXd nodes = solver.eigenvalues();
  Eigen::VectorXd weights(order);

  const double root_n = std::sqrt(static_cast<double>(order));
  for (Index i = 0; i < order; ++i) {
    double x = nodes(i);
    for (int it = 0; it < 8; ++it) {
      const auto v = hermite_values(order, x);
      const double step = v.p_n / (root_n * v.p_nm1);
      x -= step;
      if (std::fabs(step) <= 1e-16 * std::max(1.0, std::fabs(x))) break;
    }
    nodes(i) = x;
    weights(i) = 1.0 / hermite_values(order, x).christoffel_sum;
  }

  for (Index i = 0; i < order / 2; ++i) {
    const Index j = order - 1 - i;
    const double x = 0.5 * (nodes(j) - nodes(i));
    const double w = 0.5 * (weights(i) + weights(j));
    nodes(i) = -x;
    nodes(j) = x;
    weights(i) = w;
    weights(j) = w;
  }
  if (order % 2 == 1) nodes(order / 2) = 0.0;
  weights /= weights.sum();
  return GaussianQuadrature(std::move(nodes), std::move(weights), 2 * order - 1);
}

GaussianQuadrature GaussianQuadrature::composite(double half_width, Index panels, Index nodes_per_panel) {
  if (!(half_width > 0.0) || panels < 1 || nodes_per_panel < 1)
    throw std::invalid_argument("GaussianQuadrature: bad composite layout");
  // Gauss-Legendre on [-1, 1] by the same Golub-Welsch construction.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes_per_panel, nodes_per_panel);
  for (Index k = 1; k < nodes_per_panel; ++k) {
    const double kk = static_cast<double>(k);
    jacobi(k, k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  const Eigen::VectorXd gl_nodes = solver.eigenvalues();
  const Eigen::VectorXd gl_weights = 2.0 * solver.eigenvectors().row(0).transpose().cwiseAbs2();

  const Index total = panels * nodes_per_panel;
  Eigen::VectorXd nodes(total), weights(total);
  const double width = 2.0 * half_width / static_cast<double>(panels);
  const double density = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (Index p = 0; p < panels; ++p) {
    const double mid = -half_width + (static_cast<double>(p) + 0.5) * width;
    for (Index i = 0; i < nodes_per_panel; ++i) {
      const double x = mid + 0.5 * width * gl_nodes(i);
      nodes(p * nodes_per_panel + i) = x;
      weights(p * nodes_per_panel + i) = 0.5 * width * gl_weights(i) * density * std::exp(-0.5 * x * x);
    }
  }
  for (Index i = 0; i < total / 2; ++i) {
    const Index j = total - 1 - i;
    const double x = 0.5 * (nodes(j) - nodes(i));
    const double w = 0.5 * (weights(i) + weights(j));
    nodes(i) = -x;
    nodes(j) = x;
    weights(i) = w;
    weights(j) = w;
  }
  weights /= weights.sum();
  return GaussianQuadrature(std::move(nodes), std::move(weights), -1);
}

const GaussianQuadrature& GaussianQuadrature::standard() {
  static const GaussianQuadrature rule = composite(10.0, 40, 16);
  return rule;
}

}  // namespace skvp
