#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skvp/profile.hpp"
#include "skvp/profile_io.hpp"

using namespace skvp;

namespace {

void check_structure(const VarianceProfile& p) {
  const Eigen::MatrixXd s = p.to_dense();
  for (Index i = 0; i < p.n(); ++i) {
    CHECK(s(i, i) == 0.0);
    for (Index j = 0; j < p.n(); ++j) {
      CHECK(s(i, j) == s(j, i));
      CHECK(s(i, j) >= 0.0);
    }
  }
}

}  // namespace

TEST_CASE("mean field") {
  const auto one = build_mean_field(1);
  CHECK(one.row_norm() == 0.0);
  CHECK(one.to_dense()(0, 0) == 0.0);

  const auto four = build_mean_field(4);
  for (Index i = 0; i < 4; ++i) CHECK(four.row_sums()(i) == doctest::Approx(0.75).epsilon(1e-15));
  check_structure(four);

  const auto hundred = build_mean_field(100);
  CHECK(hundred.row_norm() == doctest::Approx(0.99).epsilon(1e-14));
  CHECK(hundred.c_s() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hundred.k_scale() == 100);
}

TEST_CASE("banded Toeplitz rows") {
  const auto p = build_banded_toeplitz(64, uniform_psi(8), 8);
  check_structure(p);
  CHECK(p.row_sums()(32) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.row_sums()(0) == doctest::Approx(0.5).epsilon(1e-12));
  for (Index i = 8; i <= 64 - 1 - 8; ++i) CHECK(std::abs(p.row_sums()(i) - 1.0) <= 1e-12);
  for (Index i = 0; i < 64; ++i) CHECK(p.row_sums()(i) <= 1.0 + 1e-12);
  CHECK(p(3, 11) == doctest::Approx(1.0 / 16));
  CHECK(p(3, 12) == 0.0);
}

TEST_CASE("triangular psi") {
  const auto psi = triangular_psi(8);
  double total = 0.0, top = 0.0;
  for (double v : psi) {
    total += v;
    top = std::max(top, v);
  }
  CHECK(total == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(psi[0] == 0.0);
  const auto p = build_banded_toeplitz(64, psi, 8);
  check_structure(p);
  CHECK(p.max_entry() == doctest::Approx(top));
  CHECK(p.c_s() == doctest::Approx(8 * top));
  // psi(1) = 8 / (2 * 36)
  CHECK(p(10, 11) == doctest::Approx(8.0 / 72.0).epsilon(1e-14));
}

TEST_CASE("banded Toeplitz rejects malformed lags") {
  auto psi = uniform_psi(4);
  psi[1] += 1e-6;
  CHECK_THROWS_AS(build_banded_toeplitz(32, psi, 4), std::invalid_argument);
  auto wide = uniform_psi(4);
  wide.push_back(0.01);
  CHECK_THROWS_AS(build_banded_toeplitz(32, wide, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_banded_toeplitz(32, uniform_psi(4), 4, 0.4), std::invalid_argument);
}

TEST_CASE("circulant deformation") {
  const auto psi = triangular_psi(8);
  const auto toeplitz = build_banded_toeplitz(64, psi, 8);
  const auto c = build_circulant_deformation(toeplitz);
  check_structure(c);
  for (Index i = 0; i < 64; ++i) CHECK(std::abs(c.row_sums()(i) - 1.0) <= 1e-12);
  CHECK(c(0, 60) == psi[4]);
  for (Index i = 0; i < 64; ++i)
    for (Index j = i + 1; j < 64; ++j) {
      const bool corner = j - i > 64 - 1 - 8;
      if (!corner) CHECK(c(i, j) == toeplitz(i, j));
      if (toeplitz(i, j) != c(i, j)) CHECK(corner);
    }
  CHECK_THROWS_AS(build_circulant_deformation(build_banded_toeplitz(16, uniform_psi(8), 8)), std::invalid_argument);
}

TEST_CASE("sparse random graph") {
  const auto a = build_sparse_random(256, 16, 32, 99);
  const auto b = build_sparse_random(256, 16, 32, 99);
  CHECK(a.to_dense() == b.to_dense());
  CHECK(a.max_row_support() <= 32);
  check_structure(a);
  for (Index i = 0; i < 256; ++i) CHECK(a.row_sums()(i) <= 1.0 + 1e-12);
  CHECK(a.c_card() == 2);

  const auto complete = build_sparse_random(9, 9, 8, 3);
  const auto mf = build_mean_field(9);
  for (Index i = 0; i < 9; ++i)
    for (Index j = 0; j < 9; ++j)
      if (i != j) CHECK(complete(i, j) == doctest::Approx(1.0 / 8.0));
  CHECK(complete.row_norm() == doctest::Approx(1.0));
  CHECK(mf.row_norm() == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("validate") {
  const auto mf = build_mean_field(10);
  CHECK(validate(mf, 0.5).ht_ok);
  CHECK_FALSE(validate(mf, 0.8).ht_ok);
  CHECK(validate(mf, 0.5).ht_margin == doctest::Approx(std::log(2.0) / 0.9 - 0.5));
  CHECK_FALSE(validate(build_banded_toeplitz(8, uniform_psi(2), 2), 0.1).klogn_ok);
}

TEST_CASE("ht_ok is monotone in t") {
  for (Index n : {2, 5, 17}) {
    const auto mf = build_mean_field(n);
    bool seen_ok = false;
    for (double t = 2.0; t > 0.0; t -= 0.005) {
      const bool ok = validate(mf, t).ht_ok;
      if (seen_ok) CHECK(ok);
      seen_ok = seen_ok || ok;
    }
  }
}

TEST_CASE("triplet import rejects bad input") {
  using T = Eigen::Triplet<double>;
  CHECK_THROWS_AS(VarianceProfile::from_upper_triplets(3, {T(1, 1, 0.1)}, 1), std::invalid_argument);
  CHECK_THROWS_AS(VarianceProfile::from_upper_triplets(3, {T(0, 1, -0.1)}, 1), std::invalid_argument);
  CHECK_THROWS_AS(VarianceProfile::from_upper_triplets(3, {T(0, 5, 0.1)}, 1), std::invalid_argument);
  CHECK_THROWS_AS(VarianceProfile::from_upper_triplets(3, {T(0, 1, 0.1), T(0, 1, 0.2)}, 1), std::invalid_argument);
  CHECK_THROWS_AS(VarianceProfile::from_upper_triplets(3, {T(0, 1, NAN)}, 1), std::invalid_argument);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(VarianceProfile::from_dense(asym, 1), std::invalid_argument);
}

TEST_CASE("large profiles switch to sparse storage") {
  const auto big = build_banded_toeplitz(3000, uniform_psi(4), 4);
  CHECK_FALSE(big.is_dense());
  CHECK(build_mean_field(64).is_dense());
  CHECK(big.row_sums()(1500) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(3000, -1.0, 1.0);
  const Eigen::VectorXd y = big.apply(x);
  double row = 0.0;
  big.for_each_in_row(1500, [&](Index j, double v) { row += v * x(j); });
  CHECK(y(1500) == doctest::Approx(row).epsilon(1e-14));
  CHECK(big.bilinear(x, x) == doctest::Approx(x.dot(y)).epsilon(1e-12));
}

TEST_CASE("profile spec parsing and triplet round trip") {
  const auto spec = parse_profile_spec(nlohmann::json::parse(R"({"kind": "banded_toeplitz", "n": 20, "k": 3,
                                                                 "shape": "triangular"})"));
  const auto p = build_profile(spec);
  CHECK(p.n() == 20);
  CHECK(p.k_scale() == 3);
  CHECK(parse_profile_spec(to_json(spec)).shape == "triangular");
  CHECK_THROWS(parse_profile_spec(nlohmann::json::parse(R"({"kind": "mean_field", "n": 4, "typo": 1})")));
  CHECK_THROWS(parse_profile_spec(nlohmann::json::parse(R"({"kind": "ring", "n": 4})")));

  std::stringstream buffer;
  write_profile_triplets(buffer, p);
  const auto back = read_profile_triplets(buffer);
  CHECK(back.n() == 20);
  CHECK(back.k_scale() == 3);
  CHECK(back.to_dense() == p.to_dense());

  const auto circ = build_profile(with_size(parse_profile_spec(nlohmann::json::parse(R"({"kind": "circulant"})")), 16, 4));
  for (Index i = 0; i < 16; ++i) CHECK(circ.row_sums()(i) == doctest::Approx(1.0).epsilon(1e-12));
}
