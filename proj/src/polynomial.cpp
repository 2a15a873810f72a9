#include "skvp/polynomial.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace skvp {

namespace {

Eigen::VectorXd trimmed(Eigen::VectorXd c) {
  if (c.size() == 0) return Eigen::VectorXd::Zero(1);
  Index last = c.size() - 1;
  while (last > 0 && c(last) == 0.0) --last;
  return c.head(last + 1);
}

GaussianQuadrature fit_quadrature(Index order) {
  static const GaussianQuadrature rule = GaussianQuadrature::hermite(200);
  return order == rule.order() ? rule : GaussianQuadrature::hermite(order);
}

double sech2(double x) {
  const double a = std::fabs(x);
  if (a > 350.0) return 0.0;
  const double c = std::cosh(a);
  return 1.0 / (c * c);
}

// Monomial coefficients of the orthonormal Hermite polynomials p_0..p_{d}
// in the variable y = alpha * x, i.e. of p_k(y / alpha).
std::vector<Eigen::VectorXd> scaled_hermite_monomials(Index d, double alpha) {
  std::vector<Eigen::VectorXd> p;
  p.reserve(static_cast<std::size_t>(d) + 1);
  p.push_back(Eigen::VectorXd::Ones(1));
  if (d >= 1) p.push_back((Eigen::VectorXd(2) << 0.0, 1.0).finished());
  for (Index k = 1; k < d; ++k) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(k + 2);
    next.segment(1, k + 1) = p[static_cast<std::size_t>(k)];
    next.head(k) -= std::sqrt(static_cast<double>(k)) * p[static_cast<std::size_t>(k - 1)];
    next /= std::sqrt(static_cast<double>(k + 1));
    p.push_back(std::move(next));
  }
  for (auto& c : p) {
    double scale = 1.0;
    for (Index j = 0; j < c.size(); ++j) {
      c(j) *= scale;
      scale /= alpha;
    }
  }
  return p;
}

}  // namespace

Polynomial::Polynomial(Eigen::VectorXd coeffs) : coeffs_(trimmed(std::move(coeffs))) {
  if (!coeffs_.allFinite()) throw std::invalid_argument("Polynomial: coefficients must be finite");
}

Polynomial::Polynomial(const std::vector<double>& coeffs)
    : Polynomial(Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Index>(coeffs.size())).eval()) {}

Polynomial Polynomial::constant(double c) { return Polynomial(Eigen::VectorXd::Constant(1, c)); }

Polynomial Polynomial::derivative() const {
  if (degree() == 0) return Polynomial();
  Eigen::VectorXd d(degree());
  for (Index l = 0; l < degree(); ++l) d(l) = static_cast<double>(l + 1) * coeffs_(l + 1);
  return Polynomial(std::move(d));
}

Polynomial Polynomial::antiderivative(double c0) const {
  Eigen::VectorXd a(coeffs_.size() + 1);
  a(0) = c0;
  for (Index l = 0; l < coeffs_.size(); ++l) a(l + 1) = coeffs_(l) / static_cast<double>(l + 1);
  return Polynomial(std::move(a));
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(degree() + other.degree() + 1);
  for (Index a = 0; a <= degree(); ++a)
    for (Index b = 0; b <= other.degree(); ++b) c(a + b) += coeffs_(a) * other.coeffs_(b);
  return Polynomial(std::move(c));
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(std::max(degree(), other.degree()) + 1);
  c.head(coeffs_.size()) += coeffs_;
  c.head(other.coeffs_.size()) += other.coeffs_;
  return Polynomial(std::move(c));
}

TanhFitErrors tanh_fit_errors(const Polynomial& p, double alpha_max, double h, double grid_step) {
  if (!(alpha_max >= 0.0) || !(grid_step > 0.0)) throw std::invalid_argument("tanh_fit_errors: bad grid");
  const Polynomial dp = p.derivative();
  const auto quad = fit_quadrature(std::max<Index>(200, p.degree() + 1));
  TanhFitErrors worst;
  auto check = [&](double alpha) {
    const double v = gauss_expect(
        [&](double x) {
          const double d = p(x) - std::tanh(x + h);
          return d * d;
        },
        alpha * alpha, quad);
    const double dv = gauss_expect(
        [&](double x) {
          const double d = dp(x) - sech2(x + h);
          return d * d;
        },
        alpha * alpha, quad);
    worst.value = std::max(worst.value, v);
    worst.derivative = std::max(worst.derivative, dv);
  };
  const auto steps = static_cast<Index>(std::floor(alpha_max / grid_step + 1e-9));
  for (Index j = 0; j <= steps; ++j) check(static_cast<double>(j) * grid_step);
  if (static_cast<double>(steps) * grid_step < alpha_max) check(alpha_max);
  return worst;
}

Polynomial fit_tanh_poly(double e, double alpha_max, const ModelParams& params, const TanhFitOptions& options) {
  if (!(e > 0.0)) throw std::invalid_argument("fit_tanh_poly: e must be positive");
  if (!(alpha_max > 0.0)) throw std::invalid_argument("fit_tanh_poly: alpha_max must be positive");
  if (options.max_degree < 1) throw std::invalid_argument("fit_tanh_poly: max_degree must be positive");
  const double h = params.h;
  const auto quad = fit_quadrature(options.quadrature_order);
  const Index max_u = options.max_degree - 1;

  // Hermite coefficients of x -> tanh'(alpha_max x + h).
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(max_u + 1);
  for (Index i = 0; i < quad.order(); ++i) {
    const double x = quad.nodes()(i);
    const double fx = quad.weights()(i) * sech2(alpha_max * x + h);
    double prev = 0.0;
    double cur = 1.0;
    for (Index k = 0; k <= max_u; ++k) {
      coef(k) += fx * cur;
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
    }
  }
  const auto basis = scaled_hermite_monomials(max_u, alpha_max);

  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(max_u + 1);
  for (Index d = 0; d <= max_u; ++d) {
    u.head(d + 1) += coef(d) * basis[static_cast<std::size_t>(d)];
    const Polynomial p = Polynomial(u.head(d + 1).eval()).antiderivative(std::tanh(h));
    const auto err = tanh_fit_errors(p, alpha_max, h, options.grid_step);
    if (err.value <= e && err.derivative <= e) return p;
    best = std::min(best, std::max(err.value, err.derivative));
  }
  std::ostringstream os;
  os << "fit_tanh_poly: best error " << best << " above target " << e << " at max degree " << options.max_degree;
  throw FitError(os.str(), best, e);
}

PolyStateEvolution poly_state_evolution(const VarianceProfile& profile, const ModelParams& params,
                                        const Polynomial& f, const GaussianQuadrature& quad, Index k) {
  params.check();
  if (k < 0) throw std::invalid_argument("poly_state_evolution: k must be nonnegative");
  // f^2 has degree 2 deg f; a Hermite rule of deg f + 1 nodes is exact for it.
  const Index needed = f.degree() + 1;
  const GaussianQuadrature escalated =
      quad.exact_degree() >= 2 * f.degree() ? quad : GaussianQuadrature::hermite(needed);

  PolyStateEvolution se;
  se.cq_iterates.push_back(Eigen::VectorXd::Zero(profile.n()));
  for (Index l = 0; l < k; ++l) {
    const Eigen::VectorXd& cq = se.cq_iterates.back();
    std::unordered_map<double, double> memo;
    Eigen::VectorXd second_moment(cq.size());
    for (Index i = 0; i < cq.size(); ++i) {
      auto it = memo.find(cq(i));
      if (it == memo.end()) {
        const double m = gauss_expect(
            [&f](double x) {
              const double v = f(x);
              return v * v;
            },
            cq(i), escalated);
        it = memo.emplace(cq(i), m).first;
      }
      second_moment(i) = it->second;
    }
    se.cq_iterates.push_back(params.t * profile.apply(second_moment));
  }
  return se;
}

}  // namespace skvp
