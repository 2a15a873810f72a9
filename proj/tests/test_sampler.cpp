#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skvp/sampler.hpp"

using namespace skvp;

TEST_CASE("couplings are symmetric, reproducible and respect the support") {
  const auto profile = build_banded_toeplitz(40, uniform_psi(5), 5);
  const auto a = sample_coupling(profile, 0.5, 11);
  const auto b = sample_coupling(profile, 0.5, 11);
  CHECK(a.w == b.w);
  CHECK(a.w == a.w.transpose());
  for (Index i = 0; i < 40; ++i) {
    CHECK(a.w(i, i) == 0.0);
    for (Index j = 0; j < 40; ++j)
      if (profile(i, j) == 0.0) CHECK(a.w(i, j) == 0.0);
  }
  CHECK(sample_coupling(profile, 0.5, 12).w != a.w);
}

TEST_CASE("zero profile gives zero couplings") {
  const auto zero = VarianceProfile::from_upper_triplets(6, {}, 1);
  CHECK(sample_coupling(zero, 0.7, 3).w.isZero(0.0));
}

TEST_CASE("coupling variance is t s_ij") {
  const auto profile = build_mean_field(2);
  double sum2 = 0.0;
  const int count = 100000;
  for (int s = 0; s < count; ++s) {
    const double w = sample_coupling(profile, 1.0, static_cast<std::uint64_t>(s)).w(0, 1);
    sum2 += w * w;
  }
  CHECK(std::abs(sum2 / count - 0.5) < 0.025);
}

TEST_CASE("coupling pair shares the GOE draw") {
  const auto toeplitz = build_banded_toeplitz(64, uniform_psi(8), 8);
  const auto circulant = build_circulant_deformation(toeplitz);
  const auto [same1, same2] = sample_coupling_pair(toeplitz, toeplitz, 0.5, 5);
  CHECK(same1.w == same2.w);

  const auto [w, wt] = sample_coupling_pair(toeplitz, circulant, 0.5, 5);
  for (Index i = 0; i < 64; ++i)
    for (Index j = 0; j < 64; ++j)
      if (w.w(i, j) != wt.w(i, j)) CHECK(std::abs(i - j) > 64 - 1 - 8);
  CHECK(w.w == sample_coupling(toeplitz, 0.5, 5).w);
  CHECK_THROWS_AS(sample_coupling_pair(toeplitz, build_mean_field(8), 0.5, 1), std::invalid_argument);
}

TEST_CASE("corner energy second moment") {
  // E(s) = sum over corner pairs of (W - W~)_ij s_i s_j has variance t sum s~_ij.
  const Index n = 32, k = 4;
  const double t = 0.5;
  const auto toeplitz = build_banded_toeplitz(n, uniform_psi(k), k);
  const auto circulant = build_circulant_deformation(toeplitz);
  Eigen::VectorXd sigma(n);
  for (Index i = 0; i < n; ++i) sigma(i) = (i * 7 % 3 == 0) ? 1.0 : -1.0;
  double exact = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) exact += t * std::abs(circulant(i, j) - toeplitz(i, j));
  double sum2 = 0.0;
  const int count = 20000;
  for (int s = 0; s < count; ++s) {
    const auto [w, wt] = sample_coupling_pair(toeplitz, circulant, t, static_cast<std::uint64_t>(s));
    const Eigen::MatrixXd d = w.w - wt.w;
    const double e = 0.5 * sigma.dot(d * sigma);
    sum2 += e * e;
  }
  CHECK(std::abs(sum2 / count / exact - 1.0) < 0.1);
  CHECK(exact <= t * static_cast<double>(k));
}

TEST_CASE("Gaussian field") {
  const auto zero = sample_field(Eigen::VectorXd::Zero(5), 1);
  CHECK(zero.eta.isZero(0.0));
  Eigen::VectorXd q(3);
  q << 1.0, 0.0, 4.0;
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(sample_field(q, s).eta(1) == 0.0);
  CHECK(sample_field(q, 4).eta == sample_field(q, 4).eta);
  q(1) = -1e-3;
  CHECK_THROWS_AS(sample_field(q, 1), std::invalid_argument);

  const auto ones = sample_field(Eigen::VectorXd::Ones(1000), 9);
  CHECK(std::abs(ones.eta.squaredNorm() / 1000.0 - 1.0) < 0.15);
}

TEST_CASE("coupling and field streams differ for one master seed") {
  const auto profile = build_mean_field(50);
  const auto w = sample_coupling(profile, 1.0, 3);
  const auto eta = sample_field(Eigen::VectorXd::Constant(50, 1.0 / 50.0), 3).eta;
  for (Index j = 1; j < 50; ++j) CHECK(w.w(0, j) != doctest::Approx(eta(j - 1)));
}

TEST_CASE("spectral report") {
  const auto profile = build_mean_field(4);
  CouplingMatrix zero{Eigen::MatrixXd::Zero(4, 4), 0.5, profile.id(), 0};
  const auto r0 = spectral_report(zero, profile, 0.1);
  CHECK(r0.norm_estimate == 0.0);
  CHECK(r0.within_bound);

  CouplingMatrix pair{Eigen::MatrixXd::Zero(4, 4), 0.5, profile.id(), 0};
  pair.w(0, 1) = pair.w(1, 0) = 3.0;
  CHECK(spectral_report(pair, profile, 0.1).norm_estimate == doctest::Approx(3.0).epsilon(1e-9));

  const auto w = sample_coupling(profile, 0.5, 2);
  const auto r = spectral_report(w, profile, 0.25);
  const double expected = 1.25 * (2.0 * std::sqrt(0.5 * 0.75) +
                                  6.0 / std::sqrt(std::log(1.25)) * std::sqrt(0.5 * 0.25 * std::log(4.0)));
  CHECK(r.bound_t == doctest::Approx(expected).epsilon(1e-14));
  CHECK(r.within_bound == (r.norm_estimate <= r.bound_t));
  CHECK_THROWS_AS(spectral_report(w, profile, 0.6), std::invalid_argument);
}

TEST_CASE("power iteration agrees with the eigen decomposition") {
  const auto profile = build_mean_field(30);
  const auto w = sample_coupling(profile, 0.5, 8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.w);
  const double exact = eig.eigenvalues().cwiseAbs().maxCoeff();
  const auto r = symmetric_norm(w.w, 1e-12, 100000);
  CHECK(r.converged);
  CHECK(r.norm == doctest::Approx(exact).epsilon(1e-5));
}

TEST_CASE("coupling triplets round trip") {
  const auto profile = build_banded_toeplitz(12, uniform_psi(2), 2);
  const auto w = sample_coupling(profile, 0.3, 77);
  std::stringstream buffer;
  write_coupling_triplets(buffer, w);
  const auto back = read_coupling_triplets(buffer);
  CHECK(back.w == w.w);
  CHECK(back.t == w.t);
  CHECK(back.seed == 77);
  CHECK(back.profile_id == w.profile_id);
}
