#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "skvp/csv.hpp"
#include "skvp/experiments.hpp"
#include "skvp/gibbs.hpp"
#include "skvp/sampler.hpp"

using namespace skvp;
using nlohmann::json;

namespace {

ExperimentConfig config(const char* text) { return parse_experiment_config(json::parse(text)); }

}  // namespace

TEST_CASE("config parsing is strict") {
  const auto c = config(R"({"experiment": "amp_accuracy", "profile": {"kind": "mean_field"},
                            "params": {"t": 0.4, "h": 0.3}, "n_list": [8], "samples": 3, "seed": 18446744073709551615,
                            "k_check": [2, 4], "tolerances": {"mcmc_sweeps": 500}})");
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.k_check == std::vector<Index>{2, 4});
  CHECK(c.tolerances.at("mcmc_sweeps") == 500.0);
  const auto back = parse_experiment_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const char* base = R"({"experiment": "fixed_point", "profile": {"kind": "mean_field"},
                         "params": {"t": 0.4, "h": 0.3}, "n_list": [8]})";
  CHECK_NOTHROW(config(base));
  auto with = [&](const char* key, json value) {
    auto j = json::parse(base);
    j[key] = value;
    return j;
  };
  CHECK_THROWS(parse_experiment_config(with("sampels", 3)));
  CHECK_THROWS(parse_experiment_config(with("experiment", "fixed_pointt")));
  CHECK_THROWS(parse_experiment_config(with("n_list", json::array())));
  CHECK_THROWS(parse_experiment_config(with("samples", 0)));
  CHECK_THROWS(parse_experiment_config(with("params", json{{"t", 0.4}, {"h", 0.3}, {"beta", 1}})));
  CHECK_THROWS(parse_experiment_config(with("tolerances", json{{"qcq_factor", 10}})));
  CHECK_THROWS(parse_experiment_config(with("u_list", json{0.5, 1.5})));
  CHECK_THROWS(parse_experiment_config(json::parse(R"({"experiment": "fixed_point"})")));
  CHECK(experiment_names().size() == 8);
}

TEST_CASE("summary statistics") {
  const auto ms = mean_stderr({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == 2.5);
  CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(log_log_slope({2.0, 4.0, 8.0}, {1.0, 0.5, 0.25}) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(log_log_slope({1.0, 10.0}, {3.0, 300.0}) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("exact overlap deviation matches a sum over replica pairs") {
  const Index n = 5;
  const double t = 0.5;
  const auto profile = build_sparse_random(n, 2, 2, 4);
  const SpinSystem s{sample_coupling(profile, t, 2).w, 0.3, 1.0, {}};
  const ExactGibbs gibbs(s);
  const auto st = gibbs.stats();
  Eigen::MatrixXd second = st.cov + st.m * st.m.transpose();
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(n, 0.01, 0.05);

  double direct = 0.0;
  for (std::uint64_t a = 0; a < (1U << n); ++a)
    for (std::uint64_t b = 0; b < (1U << n); ++b) {
      const auto s1 = SpinConfiguration::from_bits(a, n), s2 = SpinConfiguration::from_bits(b, n);
      const double p = std::exp(hamiltonian(s, s1) + hamiltonian(s, s2) - 2.0 * gibbs.log_z());
      direct += p * (overlap(profile, t, s1, s2).r12 - q).squaredNorm() / static_cast<double>(n);
    }
  CHECK(exact_overlap_deviation(profile, t, q, st.m, second) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("CSV helpers") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(-1.25) == "-1.25");
  CsvTable table;
  table.metadata = {"timestamp=now", "seed=4"};
  table.header = {"a", "b"};
  table.add_row({"1", "2"});
  CHECK_THROWS_AS(table.add_row({"1"}), std::invalid_argument);
  std::stringstream out;
  table.write(out);
  CHECK(out.str() == "# timestamp=now\n# seed=4\na,b\n1,2\n");
  CHECK(strip_csv_comments(out.str()) == table.body());
  const auto parsed = read_csv(out);
  CHECK(parsed.meta.at("seed") == "4");
  CHECK(parsed.rows.size() == 1);
}

TEST_CASE("small runs do not depend on the worker count") {
  const char* texts[] = {
      R"({"experiment": "free_energy_gap", "profile": {"kind": "mean_field"}, "params": {"t": 0.5, "h": 0.3},
          "n_list": [5, 6], "samples": 8, "seed": 3, "tolerances": {"max_samples": 8}})",
      R"({"experiment": "covariance_scaling", "profile": {"kind": "sparse_random", "seed": 2},
          "params": {"t": 0.5, "h": 0.3}, "n_list": [8], "k_list": [2, 4], "samples": 4, "seed": 3})",
      R"({"experiment": "overlap_concentration", "profile": {"kind": "sparse_random", "seed": 2},
          "params": {"t": 0.5, "h": 0.3}, "n_list": [8], "k_list": [2, 4], "u_list": [0, 1], "samples": 3,
          "replicas": 10, "seed": 3})",
      R"({"experiment": "amp_accuracy", "profile": {"kind": "mean_field"}, "params": {"t": 0.4, "h": 0.3},
          "n_list": [8], "samples": 4, "seed": 3, "k_iter": 6})",
      R"({"experiment": "spectral_norm", "profile": {"kind": "mean_field"}, "params": {"t": 0.5, "h": 0.3},
          "n_list": [32], "samples": 5, "seed": 3})",
      R"({"experiment": "poly_bridge", "profile": {"kind": "mean_field"}, "params": {"t": 0.4, "h": 0.3},
          "n_list": [32], "e_list": [0.05, 0.01], "k_list": [8, 31], "k_iter": 4, "samples": 2, "seed": 3,
          "nb_profile": {"kind": "sparse_random", "seed": 1}})",
  };
  for (const char* text : texts) {
    const auto c = config(text);
    CAPTURE(c.experiment);
    const auto a = run_experiment(c, RunOptions{1});
    const auto b = run_experiment(c, RunOptions{3});
    CHECK(a.table.body() == b.table.body());
    CHECK(a.summary == b.summary);
    REQUIRE(a.extra_tables.size() == b.extra_tables.size());
    for (std::size_t i = 0; i < a.extra_tables.size(); ++i)
      CHECK(a.extra_tables[i].second.body() == b.extra_tables[i].second.body());
    CHECK(a.table.metadata.size() >= 3);
  }
}

TEST_CASE("zero temperature limits") {
  const auto fe = run_experiment(config(R"({"experiment": "free_energy_gap", "profile": {"kind": "mean_field"},
      "params": {"t": 1e-10, "h": 0.3}, "n_list": [4, 6], "samples": 3, "seed": 1,
      "tolerances": {"max_abs_gap": 1e-5, "max_samples": 3}})"));
  for (const auto& cell : fe.summary.at("cells")) CHECK(std::abs(cell.at("gap").get<double>()) < 1e-5);

  const auto cov = run_experiment(config(R"({"experiment": "covariance_scaling",
      "profile": {"kind": "sparse_random", "seed": 3}, "params": {"t": 1e-10, "h": 0.3}, "n_list": [8],
      "k_list": [2, 4], "samples": 2, "seed": 1})"));
  for (const auto& cell : cov.summary.at("cells")) CHECK(cell.at("mean_mij2").get<double>() < 1e-9);
}

TEST_CASE("fixed point report") {
  const auto r = run_experiment(config(R"({"experiment": "fixed_point", "profile": {"kind": "circulant", "k": 3},
      "params": {"t": 0.5, "h": 0.3}, "n_list": [16]})"));
  CHECK(r.all_passed());
  const auto q = r.summary.at("cells")[0].at("q_star").get<std::vector<double>>();
  CHECK(q.size() == 16);
  for (double v : q) CHECK(std::abs(v - q[0]) <= 1e-9);
}

TEST_CASE("fixture file is present and versioned") {
  std::ifstream in(SKVP_SOURCE_DIR "/fixtures/calibration.json");
  REQUIRE_MESSAGE(in.good(), "fixtures/calibration.json is missing; run `skvp fixtures calibrate`");
  const auto doc = json::parse(in);
  CHECK(doc.at("version") == kFixtureVersion);
  for (const auto& [stem, entry] : doc.at("entries").items()) {
    CAPTURE(stem);
    CHECK_NOTHROW(parse_experiment_config(entry.at("config")));
    CHECK(entry.at("summary").is_object());
  }
}
