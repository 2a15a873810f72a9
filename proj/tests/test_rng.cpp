#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "skvp/parallel.hpp"
#include "skvp/rng.hpp"

using namespace skvp;

TEST_CASE("derive_seed separates tags and indices") {
  std::set<std::uint64_t> keys;
  for (auto tag : {StreamTag::kCoupling, StreamTag::kField, StreamTag::kReplica, StreamTag::kGlauber,
                   StreamTag::kGraph, StreamTag::kSample})
    for (std::uint64_t i = 0; i < 64; ++i) keys.insert(derive_seed(42, tag, i));
  CHECK(keys.size() == 6 * 64);
  CHECK(derive_seed(1, StreamTag::kCoupling, 0) != derive_seed(2, StreamTag::kCoupling, 0));
  CHECK(derive_seed(7, StreamTag::kField, 3) == derive_seed(7, StreamTag::kField, 3));
}

TEST_CASE("streams are reproducible and tag-disjoint") {
  RandomStream a(9, StreamTag::kCoupling, 0), b(9, StreamTag::kCoupling, 0), c(9, StreamTag::kField, 0);
  std::vector<std::uint64_t> xa, xc;
  for (int i = 0; i < 1000; ++i) {
    const auto v = a.next_u64();
    CHECK(v == b.next_u64());
    xa.push_back(v);
    xc.push_back(c.next_u64());
  }
  std::set<std::uint64_t> overlap(xa.begin(), xa.end());
  int shared = 0;
  for (auto v : xc) shared += overlap.count(v) ? 1 : 0;
  CHECK(shared == 0);
}

TEST_CASE("uniforms lie in the open unit interval with the right moments") {
  RandomStream s(123, StreamTag::kSample, 0);
  double sum = 0.0, sum2 = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / count == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / count == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("below stays in range and covers it") {
  RandomStream s(5, StreamTag::kGraph, 1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = s.below(7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 800);
  CHECK_THROWS_AS(s.below(0), std::invalid_argument);
}

TEST_CASE("normal quantile matches Boost") {
  const boost::math::normal_distribution<double> dist;
  for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.999, 1 - 1e-12}) {
    const double ref = boost::math::quantile(dist, p);
    CHECK(normal_quantile(p) == doctest::Approx(ref).epsilon(1e-14));
  }
  CHECK(normal_quantile(0.5) == 0.0);
  for (double p : {0.01, 0.2, 0.4}) CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-14));
}

TEST_CASE("normals have unit variance") {
  RandomStream s(77, StreamTag::kCoupling, 4);
  double sum = 0.0, sum2 = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / count) < 0.01);
  CHECK(sum2 / count == doctest::Approx(1.0).epsilon(0.015));
}

TEST_CASE("parallel_for result is independent of jobs and rethrows") {
  std::vector<double> serial(100), threaded(100);
  auto body = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      RandomStream s(1, StreamTag::kSample, i);
      out[i] = s.normal();
    };
  };
  parallel_for(serial.size(), 1, body(serial));
  parallel_for(threaded.size(), 4, body(threaded));
  CHECK(serial == threaded);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
