#include <doctest.h>

#include <cmath>
#include <numbers>

#include "skvp/errors.hpp"
#include "skvp/free_energy.hpp"

using namespace skvp;

namespace {

// mpmath, 40 digits (tests/oracles/scalar_oracle.py).
constexpr double kScalarF = 0.86115309849784346345;
constexpr double kMeanField12 = 0.85089232747123584388;

}  // namespace

TEST_CASE("log cosh is overflow safe") {
  for (double x : {-3.0, -0.2, 0.0, 0.5, 7.0}) CHECK(log_cosh(x) == doctest::Approx(std::log(std::cosh(x))).epsilon(1e-15));
  CHECK(log_cosh(1000.0) == doctest::Approx(1000.0 - std::log(2.0)).epsilon(1e-15));
  CHECK(log_cosh(-1e300) == doctest::Approx(1e300));
  CHECK(mean_log_cosh(0.0, 0.4) == doctest::Approx(std::log(std::cosh(0.4))).epsilon(1e-15));
}

TEST_CASE("scalar formula") {
  CHECK(std::abs(scalar_free_energy(ModelParams{0.5, 0.3}) - kScalarF) <= 1e-11);
  CHECK(scalar_free_energy(ModelParams{1e-10, 0.3}) ==
        doctest::Approx(std::log(2.0 * std::cosh(0.3))).epsilon(1e-9));
  CHECK(scalar_free_energy(ModelParams{0.01, 0.0}) == doctest::Approx(std::log(2.0) + 0.0025).epsilon(1e-14));
  CHECK_THROWS_AS(scalar_free_energy(ModelParams{0.7, 0.3}), std::invalid_argument);
}

TEST_CASE("asymptotic free energy") {
  const auto mf = build_mean_field(12);
  CHECK(std::abs(asymptotic_free_energy(mf, ModelParams{0.5, 0.3}) - kMeanField12) <= 1e-11);

  const auto circ = build_circulant_deformation(build_banded_toeplitz(40, triangular_psi(6), 6));
  CHECK(std::abs(asymptotic_free_energy(circ, ModelParams{0.5, 0.3}) - scalar_free_energy(ModelParams{0.5, 0.3})) <=
        1e-9);

  for (double h : {0.0, 0.3, 1.0}) {
    const double zero_t = asymptotic_free_energy(build_sparse_random(14, 4, 4, 2), ModelParams{1e-10, h});
    CHECK(std::abs(zero_t - std::log(2.0 * std::cosh(h))) <= 1e-9);
  }

  FixedPointOptions tight;
  tight.max_iter = 1;
  try {
    asymptotic_free_energy(mf, ModelParams{0.5, 0.3}, GaussianQuadrature::standard(), tight);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("functional matches the three-term formula by hand") {
  const auto profile = build_banded_toeplitz(10, uniform_psi(2), 2);
  const ModelParams p{0.4, 0.2};
  Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(10, 0.01, 0.1);
  const Eigen::VectorXd g = g_vector(q, p);
  double lc = 0.0;
  for (Index i = 0; i < 10; ++i) lc += mean_log_cosh(q(i), p.h);
  const Eigen::VectorXd one_minus = Eigen::VectorXd::Ones(10) - g;
  const double expected = std::log(2.0) + lc / 10.0 + p.t / 40.0 * one_minus.dot(profile.apply(one_minus));
  CHECK(free_energy_functional(profile, p, q) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("bounded under HT") {
  const double e_abs = std::sqrt(2.0 / std::numbers::pi);
  for (const auto& profile : {build_mean_field(16), build_banded_toeplitz(30, uniform_psi(4), 4),
                              build_sparse_random(30, 5, 5, 1)})
    for (double t : {0.1, 0.4, 0.65})
      for (double h : {-1.0, 0.0, 0.5}) {
        if (!validate(profile, t).ht_ok) continue;
        const double f = asymptotic_free_energy(profile, ModelParams{t, h});
        CHECK(std::abs(f) <= std::log(2.0) + std::abs(h) + e_abs * std::sqrt(std::log(2.0)) +
                                 t * profile.row_norm() / 4.0 + 1.0);
      }
}

TEST_CASE("Monte Carlo estimate") {
  for (double h : {0.0, 0.3, 1.0}) {
    const auto rep = mc_free_energy(build_banded_toeplitz(12, uniform_psi(3), 3), ModelParams{1e-10, h}, 5, 1);
    CHECK(std::abs(*rep.f_hat - std::log(2.0 * std::cosh(h))) <= 1e-6);
  }
  const auto single = mc_free_energy(build_mean_field(1), ModelParams{0.5, 0.3}, 4, 1);
  CHECK(*single.f_hat == doctest::Approx(std::log(2.0 * std::cosh(0.3))).epsilon(1e-15));
  CHECK(*single.f_stderr == 0.0);

  const auto mf = build_mean_field(10);
  const auto a = mc_free_energy(mf, ModelParams{0.5, 0.3}, 30, 77, 1);
  const auto b = mc_free_energy(mf, ModelParams{0.5, 0.3}, 30, 77, 4);
  CHECK(a.per_sample == b.per_sample);
  CHECK(*a.f_hat == *b.f_hat);
  CHECK(*a.f_stderr == *b.f_stderr);
  CHECK(*a.gap == *a.f_hat - a.bold_f);
  CHECK(*a.f_stderr >= 0.0);

  double mean = 0.0;
  for (double v : a.per_sample) mean += v;
  mean /= 30.0;
  double var = 0.0;
  for (double v : a.per_sample) var += (v - mean) * (v - mean);
  CHECK(*a.f_hat == doctest::Approx(mean).epsilon(1e-14));
  CHECK(*a.f_stderr == doctest::Approx(std::sqrt(var / 29.0 / 30.0)).epsilon(1e-12));

  CHECK_THROWS_AS(mc_free_energy(mf, ModelParams{0.5, 0.3}, 1, 1), std::invalid_argument);
  const auto hot = mc_free_energy(build_mean_field(6), ModelParams{1.0, 0.3}, 3, 1);
  CHECK(std::isnan(hot.bold_f));
}

TEST_CASE("report serialization") {
  const auto rep = mc_free_energy(build_mean_field(6), ModelParams{0.5, 0.3}, 3, 2);
  const auto j = to_json(rep);
  CHECK(j.at("n") == 6);
  CHECK(j.at("samples") == 3);
  CHECK(j.at("f_hat").get<double>() == *rep.f_hat);
  const auto header = free_energy_csv_header();
  CHECK(header == std::vector<std::string>{"n", "t", "h", "profile_kind", "k_scale", "bold_f", "f_hat", "f_stderr",
                                           "gap", "samples", "seed"});
  CHECK(free_energy_csv_row(rep).size() == header.size());
}
