#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skvp/amp.hpp"
#include "skvp/csv.hpp"
#include "skvp/errors.hpp"
#include "skvp/gibbs.hpp"

using namespace skvp;

TEST_CASE("initial iterates") {
  const auto profile = build_mean_field(16);
  const auto w = sample_coupling(profile, 0.4, 3);
  const ModelParams p{0.4, 0.3};
  const auto trace = amp_run(w, profile, p, GaussianQuadrature::standard(), 8);
  CHECK(trace.k() == 8);
  CHECK(trace.iterates[0].isZero(0.0));
  const Eigen::VectorXd x1 = std::tanh(0.3) * (w.w * Eigen::VectorXd::Ones(16));
  CHECK((trace.iterates[1] - x1).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(trace.onsager_used[0].isZero(0.0));
  CHECK(trace.coupling_seed == 3);

  // The step producing x^2 uses t S 1 - q^2.
  const auto se = iterate_q(profile, p, GaussianQuadrature::standard(), 2);
  const Eigen::VectorXd coeff = p.t * profile.row_sums() - se.q_iterates[2];
  CHECK((trace.onsager_used[1] - coeff).lpNorm<Eigen::Infinity>() <= 1e-15);
  const Eigen::VectorXd x2 = w.w * tanh_shifted(trace.iterates[1], p.h) - coeff.cwiseProduct(tanh_shifted(trace.iterates[0], p.h));
  CHECK((trace.iterates[2] - x2).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("trivial couplings and fields") {
  // A vanishing profile also removes the Onsager correction.
  const auto empty = VarianceProfile::from_upper_triplets(10, {}, 1);
  CouplingMatrix zero{Eigen::MatrixXd::Zero(10, 10), 0.4, empty.id(), 0};
  const auto t0 = amp_run(zero, empty, ModelParams{0.4, 0.5}, GaussianQuadrature::standard(), 6);
  for (const auto& x : t0.iterates) CHECK(x.isZero(0.0));
  CHECK(amp_error(Eigen::VectorXd::Constant(10, std::tanh(0.5)), t0, 6) == 0.0);

  const auto profile = build_mean_field(10);
  const auto w = sample_coupling(profile, 0.4, 1);
  const auto h0 = amp_run(w, profile, ModelParams{0.4, 0.0}, GaussianQuadrature::standard(), 6);
  for (const auto& x : h0.iterates) CHECK(x.isZero(0.0));
  const auto m = stats(SpinSystem{w.w, 0.0, 1.0, {}}).m;
  CHECK(amp_error(m, h0, 6) == 0.0);
}

TEST_CASE("amp error metric") {
  const auto profile = build_mean_field(4);
  CouplingMatrix zero{Eigen::MatrixXd::Zero(4, 4), 0.4, profile.id(), 0};
  const auto trace = amp_run(zero, profile, ModelParams{0.4, 0.0}, GaussianQuadrature::standard(), 2);
  CHECK(amp_error(Eigen::VectorXd::Ones(4), trace, 2) == 1.0);
  CHECK_THROWS_AS(amp_error(Eigen::VectorXd::Ones(4), trace, 3), std::invalid_argument);

  const auto big = build_mean_field(16);
  const auto w = sample_coupling(big, 0.4, 6);
  const auto tr = amp_run(w, big, ModelParams{0.4, 0.3}, GaussianQuadrature::standard(), 12);
  const auto m = stats(SpinSystem{w.w, 0.3, 1.0, {}}).m;
  double sum = 0.0;
  for (Index i = 0; i < 16; ++i) sum += std::pow(m(i) - std::tanh(tr.iterates[12](i) + 0.3), 2);
  CHECK(amp_error(m, tr, 12) == doctest::Approx(sum / 16.0).epsilon(1e-14));
}

TEST_CASE("divergence is reported with its step") {
  const auto profile = build_mean_field(6);
  CouplingMatrix w{Eigen::MatrixXd::Constant(6, 6, 1e308), 0.4, profile.id(), 0};
  w.w.diagonal().setZero();
  try {
    amp_run(w, profile, ModelParams{0.4, 1.0}, GaussianQuadrature::standard(), 4);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("polynomial AMP") {
  const auto profile = build_mean_field(12);
  const auto w = sample_coupling(profile, 0.4, 2);
  const auto c = poly_amp_run(w.w, Polynomial::constant(0.7), 5);
  CHECK(c.iterates[0].isZero(0.0));
  const Eigen::VectorXd z1 = 0.7 * (w.w * Eigen::VectorXd::Ones(12));
  CHECK((c.iterates[1] - z1).lpNorm<Eigen::Infinity>() <= 1e-15);
  CHECK((c.iterates[2] - z1).lpNorm<Eigen::Infinity>() <= 1e-15);

  const Polynomial f(std::vector<double>{0.3, 0.9, 0.0, -0.2});
  const auto zero = poly_amp_run(Eigen::MatrixXd::Zero(12, 12), f, 5);
  for (const auto& z : zero.iterates) CHECK(z.isZero(0.0));

  const auto tr = poly_amp_run(w.w, f, 4);
  const Eigen::VectorXd onsager = w.w.cwiseAbs2() * f.derivative().apply(tr.iterates[2]);
  const Eigen::VectorXd z3 = w.w * f.apply(tr.iterates[2]) - onsager.cwiseProduct(f.apply(tr.iterates[1]));
  CHECK((tr.iterates[3] - z3).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("non-backtracking iteration") {
  const Polynomial f(std::vector<double>{0.3, 0.9, 0.0, -0.2});
  const auto zero = nb_run(Eigen::MatrixXd::Zero(8, 8), f, 4, true);
  CHECK(zero.final.isZero(0.0));
  for (const auto& level : zero.family) CHECK(level.isZero(0.0));

  const auto profile = build_mean_field(9);
  const auto w = sample_coupling(profile, 0.4, 4).w;
  const auto one = nb_run(w, f, 2, true);
  CHECK(one.family[0].isZero(0.0));
  for (Index j = 0; j < 9; ++j)
    for (Index i = 0; i < 9; ++i)
      CHECK(one.family[1](j, i) == doctest::Approx(f(0.0) * (w.row(i).sum() - w(i, j))).epsilon(1e-14));

  // Direct O(n^3) recursion.
  const Index k = 4;
  Eigen::MatrixXd level = Eigen::MatrixXd::Zero(9, 9);
  for (Index l = 0; l + 1 < k; ++l) {
    Eigen::MatrixXd next(9, 9);
    for (Index j = 0; j < 9; ++j)
      for (Index i = 0; i < 9; ++i) {
        double sum = 0.0;
        for (Index r = 0; r < 9; ++r)
          if (r != j) sum += w(i, r) * f(level(i, r));
        next(j, i) = sum;
      }
    level = next;
  }
  Eigen::VectorXd final(9);
  for (Index i = 0; i < 9; ++i) {
    double sum = 0.0;
    for (Index r = 0; r < 9; ++r) sum += w(i, r) * f(level(i, r));
    final(i) = sum;
  }
  const auto nb = nb_run(w, f, k);
  CHECK(nb.family.empty());
  CHECK((nb.last_level - level).lpNorm<Eigen::Infinity>() <= 1e-13);
  CHECK((nb.final - final).lpNorm<Eigen::Infinity>() <= 1e-13);
  CHECK_THROWS_AS(nb_run(Eigen::MatrixXd::Zero(2049, 2049), f, 1), CapacityError);
}

TEST_CASE("iterate export") {
  std::vector<Eigen::VectorXd> its{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.5, -1.25)};
  std::stringstream out;
  write_iterates_csv(out, its, {"seed=3"});
  const auto parsed = read_csv(out);
  CHECK(parsed.meta.at("seed") == "3");
  CHECK(parsed.header == std::vector<std::string>{"l", "i", "x_l_i"});
  REQUIRE(parsed.rows.size() == 4);
  CHECK(parsed.rows[3] == std::vector<std::string>{"1", "1", "-1.25"});
}
