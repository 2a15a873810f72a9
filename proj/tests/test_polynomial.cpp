#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "skvp/polynomial.hpp"
#include "skvp/rng.hpp"

using namespace skvp;

namespace {

template <class Phi>
double adaptive_expect(Phi phi) {
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double x) { return phi(x) * norm * std::exp(-0.5 * x * x); }, -12.0, 12.0, 20, 1e-13);
}

// Neumaier-compensated power sum.
double compensated_eval(const Polynomial& p, double x) {
  double sum = 0.0, carry = 0.0, power = 1.0;
  for (Index l = 0; l <= p.degree(); ++l) {
    const double term = p.coeff(l) * power;
    const double t = sum + term;
    carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
    power *= x;
  }
  return sum + carry;
}

}  // namespace

TEST_CASE("construction trims trailing zeros") {
  CHECK(Polynomial(std::vector<double>{1.0, 2.0, 0.0, 0.0}).degree() == 1);
  CHECK(Polynomial(std::vector<double>{0.0, 0.0}).degree() == 0);
  CHECK(Polynomial().coeffs().size() == 1);
  CHECK(Polynomial::constant(3.0)(17.0) == 3.0);
}

TEST_CASE("arithmetic") {
  const Polynomial a(std::vector<double>{1.0, -2.0, 0.5});
  const Polynomial b(std::vector<double>{0.0, 3.0});
  for (double x : {-1.5, 0.0, 0.7, 2.0}) {
    CHECK((a * b)(x) == doctest::Approx(a(x) * b(x)));
    CHECK((a + b)(x) == doctest::Approx(a(x) + b(x)));
  }
  const auto anti = a.antiderivative(4.0);
  CHECK(anti(0.0) == 4.0);
  CHECK(anti.derivative().coeffs() == a.coeffs());
}

TEST_CASE("derivative coefficients are exact") {
  RandomStream rng(4, StreamTag::kSample, 0);
  Eigen::VectorXd c(12);
  for (Index l = 0; l < 12; ++l) c(l) = rng.normal();
  const Polynomial p(c);
  const auto d = p.derivative();
  CHECK(d.degree() == 10);
  for (Index l = 0; l < 11; ++l) CHECK(d.coeff(l) == static_cast<double>(l + 1) * c(l + 1));
  CHECK(Polynomial::constant(2.0).derivative().degree() == 0);
  CHECK(Polynomial::constant(2.0).derivative()(1.0) == 0.0);
}

TEST_CASE("Horner evaluation against compensated summation") {
  const auto p = fit_tanh_poly(0.002, std::sqrt(2.0), ModelParams{0.4, 0.3});
  RandomStream rng(5, StreamTag::kSample, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = 6.0 * rng.uniform() - 3.0;
    const double ref = compensated_eval(p, x);
    double scale = 0.0, power = 1.0;
    for (Index l = 0; l <= p.degree(); ++l, power *= std::abs(x)) scale += std::abs(p.coeff(l)) * power;
    CHECK(std::abs(p(x) - ref) <= 1e-13 * std::max(std::abs(ref), 1e-3 * scale));
  }
  Eigen::VectorXd xs(3);
  xs << -1.0, 0.0, 2.0;
  const Eigen::VectorXd ys = p.apply(xs);
  for (Index i = 0; i < 3; ++i) CHECK(ys(i) == p(xs(i)));
}

TEST_CASE("fit pins p(0) and meets the target on the grid") {
  const ModelParams params{0.4, 0.3};
  for (double e : {0.05, 0.01, 0.002}) {
    const auto p = fit_tanh_poly(e, std::sqrt(2.0), params);
    CHECK(p(0.0) == doctest::Approx(std::tanh(0.3)).epsilon(1e-15));
    const auto err = tanh_fit_errors(p, std::sqrt(2.0), 0.3);
    CHECK(err.value <= e);
    CHECK(err.derivative <= e);
  }
}

TEST_CASE("fit errors re-measured by adaptive quadrature") {
  const double e = 0.005, h = 0.3, alpha_max = std::sqrt(2.0);
  const auto p = fit_tanh_poly(e, alpha_max, ModelParams{0.4, h});
  const auto dp = p.derivative();
  for (double alpha : {0.25, 0.5, 1.0, 1.2, alpha_max}) {
    const double value = adaptive_expect([&](double x) { return std::pow(p(alpha * x) - std::tanh(alpha * x + h), 2); });
    const double deriv = adaptive_expect([&](double x) {
      const double th = std::tanh(alpha * x + h);
      return std::pow(dp(alpha * x) - (1.0 - th * th), 2);
    });
    CHECK(value <= 1.05 * e);
    CHECK(deriv <= 1.05 * e);
  }
}

TEST_CASE("zero field fit is odd") {
  const auto p = fit_tanh_poly(0.01, std::sqrt(2.0), ModelParams{0.4, 0.0});
  for (Index l = 0; l <= p.degree(); l += 2) CHECK(std::abs(p.coeff(l)) <= 1e-9);
}

TEST_CASE("fit reports failure at the degree cap") {
  TanhFitOptions opts;
  opts.max_degree = 3;
  try {
    fit_tanh_poly(1e-8, std::sqrt(2.0), ModelParams{0.4, 0.3}, opts);
    FAIL("expected FitError");
  } catch (const FitError& err) {
    CHECK(err.target() == 1e-8);
    CHECK(err.achieved() > err.target());
  }
}

TEST_CASE("polynomial state evolution") {
  const auto profile = build_mean_field(20);
  const ModelParams params{0.5, 0.3};
  const auto& quad = GaussianQuadrature::standard();

  const auto c = poly_state_evolution(profile, params, Polynomial::constant(0.4), quad, 4);
  CHECK(c.cq_iterates[0].isZero(0.0));
  const Eigen::VectorXd first = params.t * 0.16 * profile.row_sums();
  for (std::size_t l = 1; l < c.cq_iterates.size(); ++l)
    CHECK((c.cq_iterates[l] - first).lpNorm<Eigen::Infinity>() <= 1e-15);

  // x^2 has E (x^2)^2 = 3 v^2 for X ~ N(0, v): exact at low quadrature order.
  const Polynomial square(std::vector<double>{0.0, 0.0, 1.0});
  const auto low = GaussianQuadrature::hermite(2);
  const auto s = poly_state_evolution(profile, params, square, low, 2);
  CHECK(s.cq_iterates[1].isZero(0.0));
  const auto f = Polynomial(std::vector<double>{0.5, 0.0, 1.0});
  const auto r = poly_state_evolution(profile, params, f, low, 2);
  const double v = params.t * 0.25 * profile.row_sums()(0);
  const double expected = params.t * profile.row_sums()(0) * (0.25 + v + 3.0 * v * v);
  CHECK(r.cq_iterates[2](0) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("fitted polynomial stays in the envelope") {
  const double e = 0.002;
  const auto profile = build_mean_field(64);
  const ModelParams params{0.5, 0.3};
  const auto p = fit_tanh_poly(e, 1.0, params);
  const auto& quad = GaussianQuadrature::standard();
  const auto cq = poly_state_evolution(profile, params, p, quad, 20);
  const auto q = iterate_q(profile, params, quad, 20);
  for (std::size_t l = 0; l <= 20; ++l) {
    CHECK((cq.cq_iterates[l] - q.q_iterates[l]).lpNorm<Eigen::Infinity>() <= 10.0 * std::sqrt(e));
    CHECK(cq.cq_iterates[l].maxCoeff() <= 1.0);
  }
}
