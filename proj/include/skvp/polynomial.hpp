#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "skvp/profile.hpp"
#include "skvp/quadrature.hpp"
#include "skvp/scalar.hpp"

namespace skvp {

/// Real polynomial sum_l c_l x^l, coefficients lowest degree first. Trailing
/// zero coefficients are trimmed on construction; the zero polynomial keeps
/// a single coefficient.
class Polynomial {
 public:
  Polynomial() : coeffs_(Eigen::VectorXd::Zero(1)) {}
  explicit Polynomial(Eigen::VectorXd coeffs);
  explicit Polynomial(const std::vector<double>& coeffs);

  static Polynomial constant(double c);

  Index degree() const { return coeffs_.size() - 1; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  double coeff(Index l) const { return l < coeffs_.size() ? coeffs_(l) : 0.0; }

  /// Horner evaluation.
  double operator()(double x) const {
    double acc = coeffs_(coeffs_.size() - 1);
    for (Index l = coeffs_.size() - 2; l >= 0; --l) acc = acc * x + coeffs_(l);
    return acc;
  }

  /// Entrywise evaluation of a vector or matrix expression.
  template <class Derived>
  typename Derived::PlainObject apply(const Eigen::MatrixBase<Derived>& x) const {
    return x.unaryExpr([this](double v) { return (*this)(v); });
  }

  Polynomial derivative() const;
  /// Antiderivative with value c0 at zero.
  Polynomial antiderivative(double c0) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator+(const Polynomial& other) const;

 private:
  Eigen::VectorXd coeffs_;
};

/// Largest mean-square errors of p and p' against tanh(. + h) and its
/// derivative over the Gaussian scales alpha in {0, step, 2 step, ...,
/// alpha_max}.
struct TanhFitErrors {
  double value = 0.0;
  double derivative = 0.0;
};

TanhFitErrors tanh_fit_errors(const Polynomial& p, double alpha_max, double h, double grid_step = 0.01);

struct TanhFitOptions {
  Index max_degree = 25;
  double grid_step = 0.01;
  /// Quadrature order used for the projection and the error check.
  Index quadrature_order = 200;
};

/// Thrown when no polynomial up to max_degree meets the target error.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double achieved, double target)
      : std::runtime_error(what), achieved_(achieved), target_(target) {}
  double achieved() const { return achieved_; }
  double target() const { return target_; }

 private:
  double achieved_;
  double target_;
};

/// Polynomial p with p(0) = tanh(h) and, for every alpha on the grid over
/// [0, alpha_max], E(p(alpha xi) - tanh(alpha xi + h))^2 <= e and
/// E(p'(alpha xi) - tanh'(alpha xi + h))^2 <= e.
///
/// For increasing degree, tanh' is projected onto the orthonormal Hermite
/// basis of N(0, alpha_max^2) and integrated from tanh(h); the lowest degree
/// whose errors pass the grid check is returned.
Polynomial fit_tanh_poly(double e, double alpha_max, const ModelParams& params, const TanhFitOptions& options = {});

/// Polynomial counterpart of the state evolution:
/// cq^0 = 0, cq^{l+1} = t S E f(X^l)^2 with X^l ~ N(0, diag(cq^l)).
/// The quadrature is raised to order deg(f) + 1 when the supplied one is too
/// small to integrate f^2 exactly.
struct PolyStateEvolution {
  std::vector<Eigen::VectorXd> cq_iterates;
};

PolyStateEvolution poly_state_evolution(const VarianceProfile& profile, const ModelParams& params,
                                        const Polynomial& f, const GaussianQuadrature& quad, Index k);

}  // namespace skvp
