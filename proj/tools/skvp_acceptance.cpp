// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Frozen calibration values are read from the fixture file;
// a missing file or a config that no longer matches its fixture is a failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "skvp/amp.hpp"
#include "skvp/experiments.hpp"
#include "skvp/free_energy.hpp"
#include "skvp/gibbs.hpp"
#include "skvp/polynomial.hpp"
#include "skvp/rng.hpp"
#include "skvp/sampler.hpp"
#include "skvp/scalar.hpp"

using namespace skvp;
using nlohmann::json;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

class Fixtures {
 public:
  Fixtures(const std::filesystem::path& file, std::filesystem::path config_dir) : config_dir_(std::move(config_dir)) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("fixture file " + file.string() + " is missing; run `skvp fixtures calibrate`");
    doc_ = json::parse(in);
    if (doc_.value("version", 0) != kFixtureVersion)
      throw std::runtime_error("fixture file " + file.string() + " has an unexpected version");
  }

  // Config from configs/calibration/<stem>.json, checked against the copy
  // stored with the fixture.
  ExperimentConfig config(const std::string& stem) const {
    std::ifstream in(config_dir_ / (stem + ".json"));
    if (!in) throw std::runtime_error("missing config " + stem + ".json");
    const ExperimentConfig c = parse_experiment_config(json::parse(in));
    if (to_json(c) != entry(stem).at("config"))
      throw std::runtime_error("config " + stem + ".json differs from the calibrated one; recalibrate fixtures");
    return c;
  }

  const json& summary(const std::string& stem) const { return entry(stem).at("summary"); }

 private:
  const json& entry(const std::string& stem) const {
    const auto& entries = doc_.at("entries");
    if (!entries.contains(stem)) throw std::runtime_error("fixture entry '" + stem + "' is missing");
    return entries.at(stem);
  }

  json doc_;
  std::filesystem::path config_dir_;
};

// Runs are cached so that the reproducibility check can reuse them.
struct Runner {
  const Fixtures& fixtures;
  int jobs;
  std::map<std::string, ExperimentResult> results;

  const ExperimentResult& run(const std::string& stem) {
    auto it = results.find(stem);
    if (it == results.end()) it = results.emplace(stem, run_experiment(fixtures.config(stem), RunOptions{jobs})).first;
    return it->second;
  }
};

std::vector<double> column(const json& cells, const char* key) {
  std::vector<double> out;
  for (const auto& c : cells) out.push_back(c.at(key).get<double>());
  return out;
}

// ---------------------------------------------------------------- criteria

Verdict zero_temperature() {
  const std::vector<VarianceProfile> corpus = {
      build_mean_field(8), build_banded_toeplitz(16, uniform_psi(4), 4),
      build_circulant_deformation(build_banded_toeplitz(16, uniform_psi(4), 4)), build_sparse_random(12, 4, 4, 3)};
  double worst_bold = 0.0, worst_mc = 0.0;
  for (const auto& profile : corpus)
    for (double h : {0.0, 0.3, 1.0}) {
      const ModelParams p{1e-10, h};
      const double exact = std::log(2.0 * std::cosh(h));
      worst_bold = std::max(worst_bold, std::abs(asymptotic_free_energy(profile, p) - exact));
      worst_mc = std::max(worst_mc, std::abs(*mc_free_energy(profile, p, 4, 1).f_hat - exact));
    }
  return {worst_bold < 1e-5 && worst_mc < 1e-5,
          "max |F - log 2cosh h| " + num(worst_bold) + ", max |f_hat - log 2cosh h| " + num(worst_mc)};
}

Verdict doubly_stochastic() {
  const auto profile = build_circulant_deformation(build_banded_toeplitz(64, uniform_psi(8), 8));
  const ModelParams p{0.5, 0.3};
  const auto se = solve_fixed_point(profile, p);
  const double spread = se.q_star->maxCoeff() - se.q_star->minCoeff();
  const double diff = std::abs(asymptotic_free_energy(profile, p) - scalar_free_energy(p));
  return {se.converged && spread <= 1e-9 && diff <= 1e-9,
          "q* spread " + num(spread) + ", |F - scalar| " + num(diff)};
}

Verdict gap_decay(Runner& runner) {
  const std::string stem = "free_energy_gap_mean_field";
  const auto& r = runner.run(stem);
  const auto& cells = r.summary.at("cells");
  const auto& frozen = runner.fixtures.summary(stem).at("cells");
  std::vector<double> gaps, errs;
  bool within = cells.size() == frozen.size();
  for (std::size_t i = 0; i < cells.size() && within; ++i) {
    gaps.push_back(std::abs(cells[i].at("gap").get<double>()));
    errs.push_back(cells[i].at("f_stderr").get<double>());
    const double ref = std::abs(frozen[i].at("gap").get<double>());
    within = within && std::abs(gaps.back() - ref) <= 0.2 * ref;
  }
  double worst = 0.0;
  for (double e : errs) worst = std::max(worst, e);
  const bool ok = gaps.size() == 3 && strictly_decreasing(gaps) && worst < gaps.front() / 4.0 && within;
  return {ok, "|gap| " + list(gaps) + ", max stderr " + num(worst) + " vs " + num(gaps.empty() ? 0 : gaps[0] / 4) +
                  ", draws " + std::to_string(r.summary.at("samples_used").get<Index>()) +
                  (within ? ", within 20% of fixture" : ", OUTSIDE 20% of fixture")};
}

Verdict amp_accuracy(Runner& runner) {
  const std::string stem = "amp_accuracy_mean_field";
  const auto& r = runner.run(stem);
  bool monotone = true;
  std::string failed;
  for (const auto& a : r.assertions)
    if (!a.passed) {
      monotone = false;
      failed += " [" + a.name + ": " + a.detail + "]";
    }
  const auto& cell = r.summary.at("cells").at(0);
  const double plateau = cell.at("plateau").get<double>();
  const double frozen = runner.fixtures.summary(stem).at("cells").at(0).at("plateau").get<double>();
  std::vector<double> means;
  for (Index k : {2, 4, 6, 8}) means.push_back(cell.at("mean").at(static_cast<std::size_t>(k)).get<double>());
  return {monotone && plateau <= 1.2 * frozen && cell.at("method") == "exact",
          "mean error at k=2,4,6,8 " + list(means) + ", plateau " + num(plateau) + " vs 1.2 x " + num(frozen) + failed};
}

Verdict onsager_identity() {
  RandomStream rng(20240611, StreamTag::kSample, 0);
  const std::vector<VarianceProfile> profiles = {build_mean_field(16), build_banded_toeplitz(24, triangular_psi(4), 4),
                                                 build_sparse_random(20, 4, 4, 9)};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& profile = profiles[static_cast<std::size_t>(trial) % profiles.size()];
    const double t_max = std::numbers::ln2 / profile.row_norm();
    const ModelParams p{t_max * (0.01 + 0.98 * rng.uniform()), 3.0 * rng.uniform() - 1.5};
    Eigen::VectorXd q(profile.n());
    for (Index i = 0; i < q.size(); ++i) q(i) = std::numbers::ln2 * rng.uniform();
    const Eigen::VectorXd next = state_evolution_map(profile, p, q);
    const double gap = (onsager_coeff(profile, p, q, next) - onsager_coeff_derivative_form(profile, p, q))
                           .lpNorm<Eigen::Infinity>();
    worst = std::max(worst, gap);
  }
  return {worst <= 1e-12, "max disagreement " + num(worst) + " over 1000 points"};
}

Verdict covariance_scaling(Runner& runner) {
  const auto& r = runner.run("covariance_scaling_sparse");
  const auto& cells = r.summary.at("cells");
  const auto m = column(cells, "mean_mij2");
  const auto k = column(cells, "k_scale");
  if (m.size() != 2) return {false, "expected two K values"};
  const double ratio = m[0] / m[1];
  const double slope = log_log_slope(k, m);
  return {ratio >= 1.5 && ratio <= 2.8 && slope >= -1.4 && slope <= -0.6,
          "E m_ij^2 " + list(m) + ", ratio " + num(ratio) + ", slope " + num(slope)};
}

Verdict tap_residual(Runner& runner) {
  const std::string stem = "covariance_scaling_sparse";
  const auto& r = runner.run(stem);
  const auto tap = column(r.summary.at("cells"), "tap_ms");
  const auto frozen = column(runner.fixtures.summary(stem).at("cells"), "tap_ms");
  bool below = tap.size() == frozen.size();
  for (std::size_t i = 0; below && i < tap.size(); ++i) below = tap[i] <= 1.2 * frozen[i];
  return {below && strictly_decreasing(tap), "TAP mean square " + list(tap) + " vs fixture " + list(frozen)};
}

Verdict overlap_concentration(Runner& runner) {
  const auto& r = runner.run("overlap_concentration_sparse");
  std::map<double, std::vector<double>> by_u;
  for (const auto& c : r.summary.at("cells")) by_u[c.at("u").get<double>()].push_back(c.at("sampled_mean").get<double>());
  bool ok = by_u.size() == 3;
  std::string detail;
  for (const auto& [u, values] : by_u) {
    ok = ok && values.size() == 2 && strictly_decreasing(values);
    detail += "u=" + num(u) + " " + list(values) + " ";
  }
  return {ok, detail};
}

Verdict qcq_envelope() {
  const double e = 0.002;
  const auto profile = build_mean_field(64);
  const ModelParams p{0.5, 0.3};
  const auto f = fit_tanh_poly(e, 1.0, p);
  const auto& quad = GaussianQuadrature::standard();
  const auto cq = poly_state_evolution(profile, p, f, quad, 20);
  const auto q = iterate_q(profile, p, quad, 20);
  double dev = 0.0, top = 0.0;
  for (std::size_t l = 0; l <= 20; ++l) {
    dev = std::max(dev, (cq.cq_iterates[l] - q.q_iterates[l]).lpNorm<Eigen::Infinity>());
    top = std::max(top, cq.cq_iterates[l].lpNorm<Eigen::Infinity>());
  }
  return {dev <= 10.0 * std::sqrt(e) && top <= 1.0,
          "max_l |cq - q| " + num(dev) + " vs " + num(10.0 * std::sqrt(e)) + ", max_l |cq| " + num(top) +
              ", degree " + std::to_string(f.degree())};
}

Verdict poly_bridge(Runner& runner) {
  const auto& r = runner.run("poly_bridge_mean_field");
  const auto gaps = column(r.summary.at("cells"), "mean_gap_in_event");
  const auto nb = column(r.summary.at("nb"), "mean_gap");
  return {gaps.size() == 3 && nb.size() == 2 && strictly_decreasing(gaps) && strictly_decreasing(nb),
          "z-x gap over e " + list(gaps) + ", nb-z gap over K " + list(nb)};
}

Verdict oracle_consistency() {
  RandomStream rng(11, StreamTag::kSample, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double w = 4.0 * rng.uniform() - 2.0, h = 4.0 * rng.uniform() - 2.0;
    SpinSystem s{Eigen::MatrixXd::Zero(2, 2), h, 1.0, {}};
    s.w(0, 1) = s.w(1, 0) = w;
    const double log_z = std::log(2.0 * std::exp(w) * std::cosh(2.0 * h) + 2.0 * std::exp(-w));
    const double m1 = std::sinh(2.0 * h) * std::exp(w) / (std::exp(w) * std::cosh(2.0 * h) + std::exp(-w));
    worst = std::max({worst, std::abs(log_partition(s) - log_z), std::abs(stats(s).m(0) - m1)});
  }

  bool cavity = true, flip = true;
  const auto profile = build_mean_field(9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SpinSystem s{sample_coupling(profile, 0.5, seed).w, 0.3, 1.0, {}};
    for (Index i = 0; i < 9; ++i) {
      std::vector<Index> keep;
      for (Index j = 0; j < 9; ++j)
        if (j != i) keep.push_back(j);
      Eigen::MatrixXd sub(8, 8);
      for (Index a = 0; a < 8; ++a)
        for (Index b = 0; b < 8; ++b) sub(a, b) = s.w(keep[a], keep[b]);
      const auto direct = stats(SpinSystem{sub, s.h, 1.0, {}});
      const auto cav = cavity_stats(s, std::vector<Index>{i});
      cavity = cavity && cav.m(i) == 0.0;
      for (Index a = 0; a < 8; ++a) cavity = cavity && cav.m(keep[a]) == direct.m(a);
    }
    const auto plus = stats(s).m;
    s.h = -s.h;
    flip = flip && plus == -stats(s).m;
  }
  return {worst <= 1e-12 && cavity && flip, "n=2 max error " + num(worst) + ", cavity " +
                                                (cavity ? "exact" : "MISMATCH") + ", spin flip " +
                                                (flip ? "exact" : "MISMATCH")};
}

Verdict reproducibility(Runner& runner) {
  int compared = 0;
  std::string mismatched;
  const int other_jobs = runner.jobs == 1 ? 4 : 1;
  for (const auto& [stem, first] : runner.results) {
    const auto again = run_experiment(runner.fixtures.config(stem), RunOptions{runner.jobs});
    const auto threaded = run_experiment(runner.fixtures.config(stem), RunOptions{other_jobs});
    auto same = [&](const ExperimentResult& x) {
      if (x.table.body() != first.table.body() || x.extra_tables.size() != first.extra_tables.size()) return false;
      for (std::size_t i = 0; i < x.extra_tables.size(); ++i)
        if (x.extra_tables[i].second.body() != first.extra_tables[i].second.body()) return false;
      return true;
    };
    if (!same(again) || !same(threaded)) mismatched += " " + stem;
    ++compared;
  }
  return {compared > 0 && mismatched.empty(),
          std::to_string(compared) + " experiments re-run with jobs " + std::to_string(runner.jobs) + " and " +
              std::to_string(other_jobs) + (mismatched.empty() ? ", bodies identical" : ", differ:" + mismatched)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the skvp toolkit"};
  std::string fixture_file = SKVP_DEFAULT_FIXTURES;
  std::string config_dir = SKVP_DEFAULT_CONFIG_DIR;
  int jobs = 1;
  app.add_option("--fixtures", fixture_file, "Calibration fixture file");
  app.add_option("--config-dir", config_dir, "Directory with the calibration configs");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<Fixtures> fixtures;
  try {
    fixtures = std::make_unique<Fixtures>(fixture_file, config_dir);
  } catch (const std::exception& e) {
    std::cout << "FAIL  fixtures  (" << e.what() << ")\n";
    return 1;
  }
  Runner runner{*fixtures, jobs, {}};

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"1 zero-temperature exactness", zero_temperature},
      {"2 doubly stochastic reduction", doubly_stochastic},
      {"3 free energy gap decay", [&] { return gap_decay(runner); }},
      {"4 AMP accuracy", [&] { return amp_accuracy(runner); }},
      {"5 Onsager identity", onsager_identity},
      {"6 covariance scaling", [&] { return covariance_scaling(runner); }},
      {"7 TAP residual", [&] { return tap_residual(runner); }},
      {"8 overlap concentration", [&] { return overlap_concentration(runner); }},
      {"9 polynomial state evolution envelope", qcq_envelope},
      {"10 polynomial bridge", [&] { return poly_bridge(runner); }},
      {"11 oracle self-consistency", oracle_consistency},
      {"12 reproducibility", [&] { return reproducibility(runner); }},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.passed ? "PASS" : "FAIL") << "  " << name << "  (" << v.detail << "; " << num(seconds) << " s)"
              << std::endl;
    failures += v.passed ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
