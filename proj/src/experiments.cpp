#include "skvp/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "skvp/amp.hpp"
#include "skvp/free_energy.hpp"
#include "skvp/gibbs.hpp"
#include "skvp/parallel.hpp"
#include "skvp/polynomial.hpp"
#include "skvp/rng.hpp"
#include "skvp/sampler.hpp"

namespace skvp {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "experiment", "profile", "params",  "n_list", "k_list",   "samples", "seed",  "output", "tolerances",
    "t_list",     "u_list",  "e_list",  "k_iter", "k_check",  "delta",   "replicas", "nb_profile", "nb_k", "nb_e"};

const std::map<std::string, std::map<std::string, double>> kDefaultTolerances = {
    {"fixed_point", {{"tol", 1e-12}, {"constancy", 1e-9}}},
    {"free_energy_gap", {{"stderr_fraction", 0.25}, {"max_abs_gap", -1.0}, {"max_samples", 102400.0}}},
    {"amp_accuracy", {{"mcmc_sweeps", 20000}, {"mcmc_burn_in", 1000}}},
    {"covariance_scaling", {{"ratio_min", 1.5}, {"ratio_max", 2.8}, {"slope_min", -1.4}, {"slope_max", -0.6}}},
    {"overlap_concentration", {}},
    {"banded_convergence", {{"circulant_match", 1e-9}, {"pair_energy_slack", 1.1}}},
    {"spectral_norm", {{"min_fraction", 0.95}}},
    {"poly_bridge", {{"qcq_factor", 10.0}, {"qcq_steps", 20}}},
};

std::string fmt(double v) { return format_double(v); }
std::string fmt(Index v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "1" : "0"; }

std::uint64_t cell_seed(std::uint64_t seed, std::size_t s) {
  return derive_seed(seed, StreamTag::kSample, static_cast<std::uint64_t>(s));
}

double tolerance(const ExperimentConfig& c, const std::string& name) {
  const auto it = c.tolerances.find(name);
  if (it != c.tolerances.end()) return it->second;
  return kDefaultTolerances.at(c.experiment).at(name);
}

void check_tolerance_names(const ExperimentConfig& c) {
  const auto& known = kDefaultTolerances.at(c.experiment);
  for (const auto& [name, value] : c.tolerances)
    if (!known.count(name))
      throw std::invalid_argument("config: unknown tolerance '" + name + "' for experiment " + c.experiment);
}

bool uses_k(ProfileKind kind) { return kind != ProfileKind::kMeanField; }

// Cells (n, k) in config order: the product of n_list and k_list, or a single
// k per n when the profile has no k or k_list is empty.
std::vector<std::pair<Index, Index>> product_cells(const ExperimentConfig& c) {
  std::vector<std::pair<Index, Index>> cells;
  const bool with_k = uses_k(c.profile.kind) && !c.k_list.empty();
  for (Index n : c.n_list) {
    if (with_k) {
      for (Index k : c.k_list) cells.emplace_back(n, k);
    } else {
      cells.emplace_back(n, c.profile.k);
    }
  }
  return cells;
}

// Cells (n_j, k_j) taken pairwise from n_list and k_list.
std::vector<std::pair<Index, Index>> paired_cells(const ExperimentConfig& c) {
  std::vector<std::pair<Index, Index>> cells;
  if (c.k_list.empty() || !uses_k(c.profile.kind)) {
    for (Index n : c.n_list) cells.emplace_back(n, c.profile.k);
  } else if (c.k_list.size() == c.n_list.size()) {
    for (std::size_t j = 0; j < c.n_list.size(); ++j) cells.emplace_back(c.n_list[j], c.k_list[j]);
  } else {
    throw std::invalid_argument("config: n_list and k_list must have the same length for " + c.experiment);
  }
  return cells;
}

std::vector<double> t_values(const ExperimentConfig& c) {
  return c.t_list.empty() ? std::vector<double>{c.params.t} : c.t_list;
}

VarianceProfile cell_profile(const ProfileSpec& spec, Index n, Index k) { return build_profile(with_size(spec, n, k)); }

AssertionOutcome make_assertion(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

std::string describe(const std::vector<double>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? ", " : "") << values[i];
  return "[" + os.str() + "]";
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::vector<std::string> metadata_for(const ExperimentConfig& c) {
  return {"experiment=" + c.experiment, "seed=" + std::to_string(c.seed), "config=" + to_json(c).dump()};
}

SpinSystem system_for(const Eigen::MatrixXd& w, double h) {
  SpinSystem s;
  s.w = w;
  s.h = h;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");
  for (const auto& item : j.items())
    if (!kConfigKeys.count(item.key())) throw std::invalid_argument("config: unknown key '" + item.key() + "'");
  ExperimentConfig c;
  if (!j.contains("experiment")) throw std::invalid_argument("config: missing 'experiment'");
  c.experiment = j.at("experiment").get<std::string>();
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw std::invalid_argument("config: unknown experiment '" + c.experiment + "'");
  if (!j.contains("profile")) throw std::invalid_argument("config: missing 'profile'");
  c.profile = parse_profile_spec(j.at("profile"));
  if (!j.contains("params")) throw std::invalid_argument("config: missing 'params'");
  const auto& p = j.at("params");
  for (const auto& item : p.items())
    if (item.key() != "t" && item.key() != "h")
      throw std::invalid_argument("config: unknown params key '" + item.key() + "'");
  c.params.t = p.at("t").get<double>();
  c.params.h = p.value("h", 0.0);
  c.params.check();
  if (j.contains("n_list")) c.n_list = j.at("n_list").get<std::vector<Index>>();
  if (c.n_list.empty() && c.profile.n > 0) c.n_list = {c.profile.n};
  if (c.n_list.empty()) throw std::invalid_argument("config: n_list must be nonempty");
  for (Index n : c.n_list)
    if (n < 1) throw std::invalid_argument("config: n_list entries must be positive");
  if (j.contains("k_list")) c.k_list = j.at("k_list").get<std::vector<Index>>();
  if (j.contains("samples")) c.samples = j.at("samples").get<Index>();
  if (c.samples < 1) throw std::invalid_argument("config: samples must be at least 1");
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output")) c.output = j.at("output").get<std::string>();
  if (j.contains("tolerances")) c.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
  if (j.contains("t_list")) c.t_list = j.at("t_list").get<std::vector<double>>();
  if (j.contains("u_list")) c.u_list = j.at("u_list").get<std::vector<double>>();
  if (j.contains("e_list")) c.e_list = j.at("e_list").get<std::vector<double>>();
  if (j.contains("k_iter")) c.k_iter = j.at("k_iter").get<Index>();
  if (j.contains("k_check")) c.k_check = j.at("k_check").get<std::vector<Index>>();
  if (j.contains("delta")) c.delta = j.at("delta").get<double>();
  if (j.contains("replicas")) c.replicas = j.at("replicas").get<Index>();
  if (j.contains("nb_profile")) c.nb_profile = parse_profile_spec(j.at("nb_profile"));
  if (j.contains("nb_k")) c.nb_k = j.at("nb_k").get<Index>();
  if (j.contains("nb_e")) c.nb_e = j.at("nb_e").get<double>();
  for (double t : c.t_list) ModelParams{t, c.params.h}.check();
  for (double u : c.u_list)
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("config: u_list entries must lie in [0, 1]");
  for (double e : c.e_list)
    if (!(e > 0.0)) throw std::invalid_argument("config: e_list entries must be positive");
  if (c.k_iter < 1) throw std::invalid_argument("config: k_iter must be at least 1");
  if (c.replicas < 1) throw std::invalid_argument("config: replicas must be at least 1");
  check_tolerance_names(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["profile"] = to_json(c.profile);
  j["params"] = {{"t", c.params.t}, {"h", c.params.h}};
  j["n_list"] = c.n_list;
  j["k_list"] = c.k_list;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["tolerances"] = c.tolerances;
  j["t_list"] = c.t_list;
  j["u_list"] = c.u_list;
  j["e_list"] = c.e_list;
  j["k_iter"] = c.k_iter;
  j["k_check"] = c.k_check;
  j["delta"] = c.delta;
  j["replicas"] = c.replicas;
  if (c.nb_profile) j["nb_profile"] = to_json(*c.nb_profile);
  j["nb_k"] = c.nb_k;
  if (c.nb_e) j["nb_e"] = *c.nb_e;
  return j;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"fixed_point",          "free_energy_gap",      "amp_accuracy",
                                                 "covariance_scaling",   "overlap_concentration", "banded_convergence",
                                                 "spectral_norm",        "poly_bridge"};
  return names;
}

bool ExperimentResult::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const AssertionOutcome& a) { return a.passed; });
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  return r;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope: need two or more points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double exact_overlap_deviation(const VarianceProfile& profile, double t, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& m, const Eigen::MatrixXd& second_moment) {
  const Index n = profile.n();
  const Eigen::MatrixXd s = profile.to_dense();
  const Eigen::MatrixXd m2 = second_moment.cwiseAbs2();
  const Eigen::VectorXd mean_r = t * (s * m.cwiseAbs2());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double second_r = t * t * s.row(i).dot(m2 * s.row(i).transpose());
    total += second_r - 2.0 * q(i) * mean_r(i) + q(i) * q(i);
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------- fixed_point

ExperimentResult run_fixed_point(const ExperimentConfig& c, const RunOptions&) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n",        "k",        "t",         "h",          "row_norm",         "alpha",
                    "iterations", "residual", "converged", "q_max",   "q_min",            "constancy",
                    "uniqueness_gap", "rate_estimate"};
  r.summary["cells"] = json::array();
  const double tol = tolerance(c, "tol");
  const double log2 = std::numbers::ln2;

  for (const auto& [n, k] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, k);
    std::vector<double> iteration_counts;
    for (double t : t_values(c)) {
      const ModelParams params{t, c.params.h};
      const std::string cell = "n=" + std::to_string(n) + " k=" + std::to_string(k) + " t=" + fmt(t);
      const AssumptionReport report = validate(profile, t);
      if (!report.ht_ok) {
        r.assertions.push_back(make_assertion("ht " + cell, false, "t violates the high-temperature condition"));
        continue;
      }
      // Step-size stopping leaves q* within tol rho/(1-rho); the tighter step
      // keeps both starts within tol of the fixed point.
      FixedPointOptions from_zero;
      from_zero.tol = 0.1 * tol;
      from_zero.keep_history = true;
      FixedPointOptions from_top = from_zero;
      from_top.keep_history = false;
      from_top.start = Eigen::VectorXd::Constant(n, log2);
      const StateEvolution a = solve_fixed_point(profile, params, GaussianQuadrature::standard(), from_zero);
      const StateEvolution b = solve_fixed_point(profile, params, GaussianQuadrature::standard(), from_top);
      const Eigen::VectorXd& q = *a.q_star;
      const double uniqueness = (q - *b.q_star).lpNorm<Eigen::Infinity>();
      const double constancy = n > 0 ? q.maxCoeff() - q.minCoeff() : 0.0;

      // Geometric mean of successive step ratios over the first steps.
      double rate = 0.0;
      const std::size_t steps = std::min<std::size_t>(a.q_iterates.size() - 1, 30);
      if (steps >= 2) {
        const double first = (a.q_iterates[1] - a.q_iterates[0]).lpNorm<Eigen::Infinity>();
        const double last = (a.q_iterates[steps] - a.q_iterates[steps - 1]).lpNorm<Eigen::Infinity>();
        if (first > 0.0 && last > 0.0) rate = std::pow(last / first, 1.0 / static_cast<double>(steps - 1));
      }
      r.table.add_row({fmt(n), fmt(k), fmt(t), fmt(c.params.h), fmt(profile.row_norm()), fmt(t * profile.row_norm()),
                       fmt(a.iterations), fmt(a.residual), fmt_bool(a.converged && b.converged), fmt(q.maxCoeff()),
                       fmt(q.minCoeff()), fmt(constancy), fmt(uniqueness), fmt(rate)});
      iteration_counts.push_back(static_cast<double>(a.iterations));
      r.summary["cells"].push_back({{"n", n},
                                    {"k", k},
                                    {"t", t},
                                    {"iterations", a.iterations},
                                    {"residual", a.residual},
                                    {"q_star", std::vector<double>(q.data(), q.data() + q.size())}});

      r.assertions.push_back(make_assertion("converged " + cell, a.converged && b.converged,
                                            "residual " + fmt(a.residual) + " / " + fmt(b.residual)));
      r.assertions.push_back(
          make_assertion("uniqueness " + cell, uniqueness <= 2.0 * tol, "gap " + fmt(uniqueness)));
      r.assertions.push_back(make_assertion("below log 2 " + cell, q.maxCoeff() < log2 + 1e-9,
                                            "max " + fmt(q.maxCoeff())));
      if (profile.kind() == ProfileKind::kCirculant || profile.kind() == ProfileKind::kMeanField) {
        r.assertions.push_back(make_assertion("constant q* " + cell, constancy <= tolerance(c, "constancy"),
                                              "spread " + fmt(constancy)));
      }
    }
    if (iteration_counts.size() >= 2) {
      const auto ts = t_values(c);
      bool grows = std::is_sorted(ts.begin(), ts.end());
      for (std::size_t i = 1; grows && i < iteration_counts.size(); ++i)
        grows = iteration_counts[i] >= iteration_counts[i - 1];
      r.assertions.push_back(make_assertion("iterations grow with t n=" + std::to_string(n), grows,
                                            "iterations " + describe(iteration_counts)));
    }
  }
  return r;
}

// ---------------------------------------------------------------- free_energy_gap

ExperimentResult run_free_energy_gap(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = free_energy_csv_header();
  r.table.header.push_back("scalar_f");
  r.table.header.push_back("gap_scalar");
  r.summary["cells"] = json::array();

  const bool scalar_ok = c.params.t < std::numbers::ln2;
  const double scalar = scalar_ok ? scalar_free_energy(c.params) : std::nan("");
  const bool banded = c.profile.kind == ProfileKind::kBandedToeplitz;
  const auto cells = paired_cells(c);
  const auto cap = static_cast<Index>(tolerance(c, "max_samples"));

  // Doubles the draw count until every stderr is below the required fraction
  // of the first gap (or the cap is reached). Banded runs use one pass.
  std::vector<FreeEnergyReport> reports;
  std::vector<double> gaps;
  std::vector<double> stderrs;
  Index samples = std::max<Index>(c.samples, 2);
  for (;;) {
    reports.clear();
    gaps.clear();
    stderrs.clear();
    for (const auto& [n, k] : cells) {
      const VarianceProfile profile = cell_profile(c.profile, n, k);
      reports.push_back(mc_free_energy(profile, c.params, samples, c.seed, options.jobs));
      const auto& rep = reports.back();
      gaps.push_back(rep.gap ? std::fabs(*rep.gap) : std::nan(""));
      stderrs.push_back(*rep.f_stderr);
    }
    if (banded || gaps.empty() || samples * 2 > cap) break;
    const double limit = tolerance(c, "stderr_fraction") * gaps.front();
    if (*std::max_element(stderrs.begin(), stderrs.end()) < limit) break;
    samples *= 2;
  }
  r.summary["samples_used"] = samples;

  std::vector<double> scalar_gaps;
  for (const auto& rep : reports) {
    const double gap_scalar = *rep.f_hat - scalar;
    auto row = free_energy_csv_row(rep);
    row.push_back(fmt(scalar));
    row.push_back(fmt(gap_scalar));
    r.table.add_row(std::move(row));
    json cell = to_json(rep);
    cell["scalar_f"] = scalar_ok ? json(scalar) : json(nullptr);
    cell["gap_scalar"] = scalar_ok ? json(gap_scalar) : json(nullptr);
    r.summary["cells"].push_back(cell);
    scalar_gaps.push_back(std::fabs(gap_scalar));
  }

  const double max_abs_gap = tolerance(c, "max_abs_gap");
  if (max_abs_gap > 0.0) {
    const double worst = *std::max_element(gaps.begin(), gaps.end());
    r.assertions.push_back(make_assertion("all gaps below " + fmt(max_abs_gap), worst < max_abs_gap,
                                          "largest |gap| " + fmt(worst)));
  }
  if (gaps.size() >= 2) {
    if (banded) {
      r.assertions.push_back(make_assertion("gap to scalar formula decreasing in k", strictly_decreasing(scalar_gaps),
                                            "|f_hat - scalar| " + describe(scalar_gaps)));
    } else {
      r.assertions.push_back(
          make_assertion("gap decreasing in n", strictly_decreasing(gaps), "|f_hat - bold_f| " + describe(gaps)));
      const double limit = tolerance(c, "stderr_fraction") * gaps.front();
      const double worst = *std::max_element(stderrs.begin(), stderrs.end());
      r.assertions.push_back(make_assertion("stderr below fraction of first gap", worst < limit,
                                            "max stderr " + fmt(worst) + " vs " + fmt(limit)));
    }
  }
  return r;
}

// ---------------------------------------------------------------- amp_accuracy

ExperimentResult run_amp_accuracy(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n", "k_scale", "t", "h", "seed_index", "k", "amp_error", "method"};
  CsvTable agg;
  agg.metadata = r.table.metadata;
  agg.header = {"n", "k_scale", "t", "h", "k", "mean_amp_error", "stderr", "samples"};
  r.summary["cells"] = json::array();

  const Index big_k = c.k_iter;
  std::vector<Index> checks = c.k_check.empty() ? std::vector<Index>{2, 4, 6, 8} : c.k_check;
  checks.erase(std::remove_if(checks.begin(), checks.end(), [&](Index k) { return k < 0 || k > big_k; }),
               checks.end());
  const auto samples = static_cast<std::size_t>(c.samples);

  for (const auto& [n, k] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, k);
    std::vector<double> plateaus;
    for (double t : t_values(c)) {
      const ModelParams params{t, c.params.h};
      const bool exact = n <= ExactGibbs::kEnumerationCap;
      std::vector<std::vector<double>> errors(samples);
      parallel_for(samples, options.jobs, [&](std::size_t s) {
        const CouplingMatrix w = sample_coupling(profile, t, cell_seed(c.seed, s));
        const SpinSystem system = system_for(w.w, params.h);
        Eigen::VectorXd m;
        if (exact) {
          m = ExactGibbs(system).magnetizations();
        } else {
          GlauberOptions g;
          g.sweeps = static_cast<Index>(tolerance(c, "mcmc_sweeps"));
          g.burn_in = static_cast<Index>(tolerance(c, "mcmc_burn_in"));
          m = glauber_magnetization(system, g, cell_seed(c.seed, s));
        }
        const AmpTrace trace = amp_run(w, profile, params, GaussianQuadrature::standard(), big_k);
        errors[s].resize(static_cast<std::size_t>(big_k) + 1);
        for (Index l = 0; l <= big_k; ++l) errors[s][static_cast<std::size_t>(l)] = amp_error(m, trace, l);
      });
      for (std::size_t s = 0; s < samples; ++s)
        for (Index l = 0; l <= big_k; ++l)
          r.table.add_row({fmt(n), fmt(profile.k_scale()), fmt(t), fmt(c.params.h), fmt(static_cast<Index>(s)),
                           fmt(l), fmt(errors[s][static_cast<std::size_t>(l)]), exact ? "exact" : "mcmc"});
      std::vector<double> means;
      std::vector<double> ses;
      for (Index l = 0; l <= big_k; ++l) {
        std::vector<double> column(samples);
        for (std::size_t s = 0; s < samples; ++s) column[s] = errors[s][static_cast<std::size_t>(l)];
        const MeanStderr ms = mean_stderr(column);
        means.push_back(ms.mean);
        ses.push_back(ms.se);
        agg.add_row({fmt(n), fmt(profile.k_scale()), fmt(t), fmt(c.params.h), fmt(l), fmt(ms.mean), fmt(ms.se),
                     fmt(c.samples)});
      }
      const std::string cell = "n=" + std::to_string(n) + " t=" + fmt(t);
      for (std::size_t j = 1; j < checks.size(); ++j) {
        const auto a = static_cast<std::size_t>(checks[j - 1]);
        const auto b = static_cast<std::size_t>(checks[j]);
        r.assertions.push_back(make_assertion(
            "error non-increasing k=" + std::to_string(a) + "->" + std::to_string(b) + " " + cell,
            means[b] <= means[a] + ses[b], fmt(means[a]) + " -> " + fmt(means[b]) + " (stderr " + fmt(ses[b]) + ")"));
      }
      plateaus.push_back(means.back());
      r.summary["cells"].push_back({{"n", n},
                                    {"k_scale", profile.k_scale()},
                                    {"t", t},
                                    {"method", exact ? "exact" : "mcmc"},
                                    {"mean", means},
                                    {"stderr", ses},
                                    {"plateau", means.back()}});
    }
    if (plateaus.size() >= 2) {
      const auto ts = t_values(c);
      bool grows = std::is_sorted(ts.begin(), ts.end());
      for (std::size_t i = 1; grows && i < plateaus.size(); ++i) grows = plateaus[i] > plateaus[i - 1];
      r.assertions.push_back(
          make_assertion("plateau grows with t n=" + std::to_string(n), grows, "plateaus " + describe(plateaus)));
    }
  }
  r.extra_tables.emplace_back("summary", std::move(agg));
  return r;
}

// ---------------------------------------------------------------- covariance_scaling

ExperimentResult run_covariance_scaling(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n",        "k_scale", "t",      "h",        "samples",      "mean_mij2",
                    "se_mij2",  "tap_ms",  "se_tap", "cavity_shift", "se_shift"};
  CsvTable slopes;
  slopes.metadata = r.table.metadata;
  slopes.header = {"n", "quantity", "slope"};
  r.summary["cells"] = json::array();
  const auto samples = static_cast<std::size_t>(c.samples);

  std::map<Index, std::vector<std::array<double, 4>>> by_n;  // k_scale, mij2, tap, shift
  for (const auto& [n, k] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, k);
    std::vector<double> mij2(samples), tap(samples), shift(samples);
    parallel_for(samples, options.jobs, [&](std::size_t s) {
      const CouplingMatrix w = sample_coupling(profile, c.params.t, cell_seed(c.seed, s));
      const SpinSystem system = system_for(w.w, c.params.h);
      const GibbsStats st = stats(system);
      double sum = 0.0;
      Index edges = 0;
      for (Index i = 0; i < n; ++i)
        profile.for_each_in_row(i, [&](Index j, double) {
          if (j > i) {
            sum += st.cov(i, j) * st.cov(i, j);
            ++edges;
          }
        });
      mij2[s] = edges > 0 ? sum / static_cast<double>(edges) : 0.0;
      const CavityAnalysis ca = cavity_analysis(system);
      tap[s] = ca.tap_residual.squaredNorm() / static_cast<double>(n);
      shift[s] = n > 1 ? ca.cavity_shift.sum() / static_cast<double>(n * (n - 1)) : 0.0;
    });
    const MeanStderr a = mean_stderr(mij2);
    const MeanStderr b = mean_stderr(tap);
    const MeanStderr d = mean_stderr(shift);
    r.table.add_row({fmt(n), fmt(profile.k_scale()), fmt(c.params.t), fmt(c.params.h), fmt(c.samples), fmt(a.mean),
                     fmt(a.se), fmt(b.mean), fmt(b.se), fmt(d.mean), fmt(d.se)});
    r.summary["cells"].push_back({{"n", n},
                                  {"k_scale", profile.k_scale()},
                                  {"mean_mij2", a.mean},
                                  {"se_mij2", a.se},
                                  {"tap_ms", b.mean},
                                  {"se_tap", b.se},
                                  {"cavity_shift", d.mean},
                                  {"se_shift", d.se}});
    by_n[n].push_back({static_cast<double>(profile.k_scale()), a.mean, b.mean, d.mean});
  }

  for (const auto& [n, rows] : by_n) {
    if (rows.size() < 2) continue;
    std::vector<double> ks, mij2, tap, shift;
    for (const auto& row : rows) {
      ks.push_back(row[0]);
      mij2.push_back(row[1]);
      tap.push_back(row[2]);
      shift.push_back(row[3]);
    }
    const double slope_m = log_log_slope(ks, mij2);
    const double slope_t = log_log_slope(ks, tap);
    const double slope_s = log_log_slope(ks, shift);
    slopes.add_row({fmt(n), "mean_mij2", fmt(slope_m)});
    slopes.add_row({fmt(n), "tap_ms", fmt(slope_t)});
    slopes.add_row({fmt(n), "cavity_shift", fmt(slope_s)});
    r.summary["slopes"][std::to_string(n)] = {{"mean_mij2", slope_m}, {"tap_ms", slope_t}, {"cavity_shift", slope_s}};
    const std::string cell = " n=" + std::to_string(n);
    for (std::size_t j = 1; j < ks.size(); ++j) {
      if (ks[j] != 2.0 * ks[j - 1]) continue;
      const double ratio = mij2[j - 1] / mij2[j];
      r.assertions.push_back(make_assertion(
          "E m_ij^2 ratio K=" + fmt(ks[j - 1]) + "->" + fmt(ks[j]) + cell,
          ratio >= tolerance(c, "ratio_min") && ratio <= tolerance(c, "ratio_max"), "ratio " + fmt(ratio)));
    }
    r.assertions.push_back(
        make_assertion("E m_ij^2 log-log slope" + cell,
                       slope_m >= tolerance(c, "slope_min") && slope_m <= tolerance(c, "slope_max"),
                       "slope " + fmt(slope_m)));
    r.assertions.push_back(
        make_assertion("TAP residual decreasing in K" + cell, strictly_decreasing(tap), "tap_ms " + describe(tap)));
  }
  r.extra_tables.emplace_back("slopes", std::move(slopes));
  return r;
}

// ---------------------------------------------------------------- overlap_concentration

ExperimentResult run_overlap_concentration(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n",        "k_scale",    "u",          "t",        "h",         "samples",
                    "replicas", "sampled_mean", "sampled_se", "exact_mean", "exact_se"};
  r.summary["cells"] = json::array();
  const std::vector<double> us = c.u_list.empty() ? std::vector<double>{0.0, 0.5, 1.0} : c.u_list;
  const auto samples = static_cast<std::size_t>(c.samples);
  const Index pairs = c.replicas;

  // (n, u) -> sequence over k of (sampled, exact).
  std::map<std::pair<Index, double>, std::vector<std::pair<double, double>>> trend;
  for (const auto& [n, k] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, k);
    const StateEvolution se = solve_fixed_point(profile, c.params);
    const Eigen::VectorXd q = *se.q_star;
    // sampled[u][s], exact[u][s]
    std::vector<std::vector<double>> sampled(us.size(), std::vector<double>(samples));
    std::vector<std::vector<double>> exact(us.size(), std::vector<double>(samples));
    parallel_for(samples, options.jobs, [&](std::size_t s) {
      const std::uint64_t seed = cell_seed(c.seed, s);
      const CouplingMatrix w = sample_coupling(profile, c.params.t, seed);
      const GaussianField eta = sample_field(q, seed);
      for (std::size_t a = 0; a < us.size(); ++a) {
        SpinSystem system = system_for(w.w, c.params.h);
        system.u = us[a];
        system.eta = eta.eta;
        const ExactGibbs gibbs(system);
        const GibbsStats st = gibbs.stats();
        const Eigen::MatrixXd second = st.cov + st.m * st.m.transpose();
        exact[a][s] = exact_overlap_deviation(profile, c.params.t, q, st.m, second);
        const auto reps = gibbs.sample_replicas(2 * pairs, seed);
        double total = 0.0;
        for (Index p = 0; p < pairs; ++p) {
          const OverlapSample o = overlap(profile, c.params.t, reps[static_cast<std::size_t>(2 * p)],
                                          reps[static_cast<std::size_t>(2 * p + 1)]);
          total += normalized_sq_distance(o.r12, q);
        }
        sampled[a][s] = total / static_cast<double>(pairs);
      }
    });
    for (std::size_t a = 0; a < us.size(); ++a) {
      const MeanStderr sm = mean_stderr(sampled[a]);
      const MeanStderr em = mean_stderr(exact[a]);
      r.table.add_row({fmt(n), fmt(profile.k_scale()), fmt(us[a]), fmt(c.params.t), fmt(c.params.h), fmt(c.samples),
                       fmt(pairs), fmt(sm.mean), fmt(sm.se), fmt(em.mean), fmt(em.se)});
      r.summary["cells"].push_back({{"n", n},
                                    {"k_scale", profile.k_scale()},
                                    {"u", us[a]},
                                    {"sampled_mean", sm.mean},
                                    {"sampled_se", sm.se},
                                    {"exact_mean", em.mean},
                                    {"exact_se", em.se}});
      trend[{n, us[a]}].emplace_back(sm.mean, em.mean);
    }
  }
  for (const auto& [key, values] : trend) {
    if (values.size() < 2) continue;
    std::vector<double> sm, em;
    for (const auto& [a, b] : values) {
      sm.push_back(a);
      em.push_back(b);
    }
    const std::string cell = " n=" + std::to_string(key.first) + " u=" + fmt(key.second);
    r.assertions.push_back(
        make_assertion("sampled overlap deviation decreasing in K" + cell, strictly_decreasing(sm), describe(sm)));
    r.assertions.push_back(
        make_assertion("exact overlap deviation decreasing in K" + cell, strictly_decreasing(em), describe(em)));
  }
  return r;
}

// ---------------------------------------------------------------- banded_convergence

ExperimentResult run_banded_convergence(const ExperimentConfig& c, const RunOptions& options) {
  if (c.profile.kind != ProfileKind::kBandedToeplitz && c.profile.kind != ProfileKind::kCirculant)
    throw std::invalid_argument("banded_convergence: profile must be banded_toeplitz or circulant");
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n",          "k",          "t",         "h",          "bold_f_toeplitz", "bold_f_circulant",
                    "scalar_f",   "qstar_spread_circulant", "f_hat", "f_stderr", "gap_hat_scalar",
                    "pair_energy_ms", "pair_energy_expected", "pair_energy_bound"};
  r.summary["cells"] = json::array();
  const double scalar = scalar_free_energy(c.params);
  const auto samples = static_cast<std::size_t>(std::max<Index>(c.samples, 2));
  ProfileSpec base = c.profile;
  base.kind = ProfileKind::kBandedToeplitz;

  std::vector<double> mc_gaps;
  for (const auto& [n, k] : paired_cells(c)) {
    const VarianceProfile toe = cell_profile(base, n, k);
    const VarianceProfile circ = build_circulant_deformation(toe);
    const double bold_toe = asymptotic_free_energy(toe, c.params);
    const double bold_circ = asymptotic_free_energy(circ, c.params);
    const Eigen::VectorXd q_circ = *solve_fixed_point(circ, c.params).q_star;
    const double spread = q_circ.maxCoeff() - q_circ.minCoeff();

    std::vector<double> energy(samples);
    Eigen::VectorXd sigma(n);
    for (Index i = 0; i < n; ++i) sigma(i) = (i % 2 == 0) ? 1.0 : -1.0;
    parallel_for(samples, options.jobs, [&](std::size_t s) {
      const auto [w, wc] = sample_coupling_pair(toe, circ, c.params.t, cell_seed(c.seed, s));
      const double e = 0.5 * sigma.dot((w.w - wc.w) * sigma);
      energy[s] = e * e;
    });
    const double energy_ms = mean_stderr(energy).mean;
    double expected = 0.0;
    for (Index i = 0; i < n; ++i)
      circ.for_each_in_row(i, [&](Index j, double v) {
        if (j > i) expected += c.params.t * (v - toe(i, j));
      });
    const double bound = c.params.t * static_cast<double>(k);

    std::string f_hat, f_se, gap;
    json cell = {{"n", n},          {"k", k},          {"bold_f_toeplitz", bold_toe}, {"bold_f_circulant", bold_circ},
                 {"scalar_f", scalar}, {"pair_energy_ms", energy_ms}};
    if (n <= ExactGibbs::kEnumerationCap) {
      const FreeEnergyReport rep = mc_free_energy(toe, c.params, static_cast<Index>(samples), c.seed, options.jobs);
      f_hat = fmt(*rep.f_hat);
      f_se = fmt(*rep.f_stderr);
      gap = fmt(*rep.f_hat - scalar);
      mc_gaps.push_back(std::fabs(*rep.f_hat - scalar));
      cell["f_hat"] = *rep.f_hat;
      cell["f_stderr"] = *rep.f_stderr;
    }
    r.table.add_row({fmt(n), fmt(k), fmt(c.params.t), fmt(c.params.h), fmt(bold_toe), fmt(bold_circ), fmt(scalar),
                     fmt(spread), f_hat, f_se, gap, fmt(energy_ms), fmt(expected), fmt(bound)});
    r.summary["cells"].push_back(cell);

    const std::string tag = " n=" + std::to_string(n) + " k=" + std::to_string(k);
    r.assertions.push_back(make_assertion("circulant free energy equals scalar formula" + tag,
                                          std::fabs(bold_circ - scalar) <= tolerance(c, "circulant_match"),
                                          "difference " + fmt(bold_circ - scalar)));
    r.assertions.push_back(make_assertion("pair energy within t k" + tag,
                                          energy_ms <= tolerance(c, "pair_energy_slack") * bound,
                                          fmt(energy_ms) + " vs " + fmt(bound)));
  }
  if (mc_gaps.size() >= 2) {
    r.assertions.push_back(make_assertion("gap to scalar formula decreasing in k", strictly_decreasing(mc_gaps),
                                          "|f_hat - scalar| " + describe(mc_gaps)));
  }
  return r;
}

// ---------------------------------------------------------------- spectral_norm

ExperimentResult run_spectral_norm(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n",          "k_scale",          "seed_index", "norm", "bound_t", "bound_t_untempered",
                    "within_t",   "within_untempered", "converged", "iterations"};
  CsvTable agg;
  agg.metadata = r.table.metadata;
  agg.header = {"n", "k_scale", "delta", "samples", "fraction_within_t", "fraction_within_untempered", "mean_norm"};
  r.summary["cells"] = json::array();
  const auto samples = static_cast<std::size_t>(c.samples);

  for (const auto& [n, k] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, k);
    std::vector<SpectralBoundReport> reports(samples);
    parallel_for(samples, options.jobs, [&](std::size_t s) {
      reports[s] = spectral_report(sample_coupling(profile, c.params.t, cell_seed(c.seed, s)), profile, c.delta);
    });
    double within = 0.0;
    double within_u = 0.0;
    std::vector<double> norms;
    for (std::size_t s = 0; s < samples; ++s) {
      const auto& rep = reports[s];
      r.table.add_row({fmt(n), fmt(profile.k_scale()), fmt(static_cast<Index>(s)), fmt(rep.norm_estimate),
                       fmt(rep.bound_t), fmt(rep.bound_t_untempered), fmt_bool(rep.within_bound),
                       fmt_bool(rep.norm_estimate <= rep.bound_t_untempered), fmt_bool(rep.converged),
                       fmt(rep.iterations)});
      within += rep.within_bound ? 1.0 : 0.0;
      within_u += rep.norm_estimate <= rep.bound_t_untempered ? 1.0 : 0.0;
      norms.push_back(rep.norm_estimate);
    }
    const double frac = within / static_cast<double>(samples);
    const double frac_u = within_u / static_cast<double>(samples);
    const double mean_norm = mean_stderr(norms).mean;
    agg.add_row({fmt(n), fmt(profile.k_scale()), fmt(c.delta), fmt(c.samples), fmt(frac), fmt(frac_u), fmt(mean_norm)});
    r.summary["cells"].push_back({{"n", n},
                                  {"k_scale", profile.k_scale()},
                                  {"fraction_within_t", frac},
                                  {"fraction_within_untempered", frac_u},
                                  {"mean_norm", mean_norm}});
    r.assertions.push_back(make_assertion("fraction within bound n=" + std::to_string(n),
                                          frac >= tolerance(c, "min_fraction"), "fraction " + fmt(frac)));
  }
  r.extra_tables.emplace_back("summary", std::move(agg));
  return r;
}

// ---------------------------------------------------------------- poly_bridge

ExperimentResult run_poly_bridge(const ExperimentConfig& c, const RunOptions& options) {
  ExperimentResult r;
  r.experiment = c.experiment;
  r.table.metadata = metadata_for(c);
  r.table.header = {"n", "e", "degree", "k", "samples", "c_w", "fraction_in_event", "mean_gap_in_event", "se_gap",
                    "mean_gap_all"};
  CsvTable qcq;
  qcq.metadata = r.table.metadata;
  qcq.header = {"n", "e", "degree", "steps", "max_dev", "envelope", "max_cq", "hypothesis_ok"};
  CsvTable nb;
  nb.metadata = r.table.metadata;
  nb.header = {"n", "k_scale", "e", "degree", "k", "samples", "mean_gap", "se_gap"};
  r.summary["cells"] = json::array();
  r.summary["qcq"] = json::array();
  r.summary["nb"] = json::array();

  std::vector<double> es = c.e_list.empty() ? std::vector<double>{0.05, 0.01, 0.002} : c.e_list;
  const double nb_e = c.nb_e ? *c.nb_e : *std::min_element(es.begin(), es.end());
  const auto samples = static_cast<std::size_t>(c.samples);
  const Index k = c.k_iter;
  const auto steps = static_cast<Index>(tolerance(c, "qcq_steps"));
  const double factor = tolerance(c, "qcq_factor");
  const auto& quad = GaussianQuadrature::standard();
  const double hypothesis = (1.0 - std::numbers::ln2) / 10.0;

  for (const auto& [n, kk] : product_cells(c)) {
    const VarianceProfile profile = cell_profile(c.profile, n, kk);
    const std::string tag = " n=" + std::to_string(n);

    // Polynomial versus tanh AMP on shared couplings, restricted to ||W|| <= C_W.
    const CouplingMatrix probe = sample_coupling(profile, c.params.t, cell_seed(c.seed, 0));
    const double c_w = spectral_report(probe, profile, c.delta).bound_t;
    std::vector<Polynomial> fits;
    for (double e : es) fits.push_back(fit_tanh_poly(e, std::numbers::sqrt2, c.params));
    std::vector<std::vector<double>> gaps(es.size(), std::vector<double>(samples));
    std::vector<int> in_event(samples);
    parallel_for(samples, options.jobs, [&](std::size_t s) {
      const CouplingMatrix w = sample_coupling(profile, c.params.t, cell_seed(c.seed, s));
      in_event[s] = symmetric_norm(w.w).norm <= c_w ? 1 : 0;
      const AmpTrace x = amp_run(w, profile, c.params, quad, k);
      for (std::size_t a = 0; a < es.size(); ++a) {
        const PolyAmpTrace z = poly_amp_run(w.w, fits[a], k);
        gaps[a][s] = normalized_sq_distance(z.iterates.back(), x.iterates.back());
      }
    });
    const double fraction = static_cast<double>(std::count(in_event.begin(), in_event.end(), 1)) /
                            static_cast<double>(samples);
    std::vector<double> restricted_means;
    for (std::size_t a = 0; a < es.size(); ++a) {
      std::vector<double> restricted(samples);
      for (std::size_t s = 0; s < samples; ++s) restricted[s] = in_event[s] ? gaps[a][s] : 0.0;
      const MeanStderr ms = mean_stderr(restricted);
      const MeanStderr all = mean_stderr(gaps[a]);
      r.table.add_row({fmt(n), fmt(es[a]), fmt(fits[a].degree()), fmt(k), fmt(c.samples), fmt(c_w), fmt(fraction),
                       fmt(ms.mean), fmt(ms.se), fmt(all.mean)});
      r.summary["cells"].push_back({{"n", n},
                                    {"e", es[a]},
                                    {"degree", fits[a].degree()},
                                    {"fraction_in_event", fraction},
                                    {"mean_gap_in_event", ms.mean},
                                    {"se_gap", ms.se}});
      restricted_means.push_back(ms.mean);
    }
    {
      // Order by decreasing e so that "decreasing" means "shrinks with e".
      std::vector<std::size_t> order(es.size());
      for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return es[a] > es[b]; });
      std::vector<double> seq;
      for (std::size_t a : order) seq.push_back(restricted_means[a]);
      r.assertions.push_back(make_assertion("z-x gap shrinks with e" + tag, strictly_decreasing(seq), describe(seq)));
    }

    // Polynomial state evolution against q^l.
    const StateEvolution q = iterate_q(profile, c.params, quad, steps);
    for (double e : es) {
      const Polynomial f = fit_tanh_poly(e, 1.0, c.params);
      const PolyStateEvolution cq = poly_state_evolution(profile, c.params, f, quad, steps);
      double max_dev = 0.0;
      double max_cq = 0.0;
      for (Index l = 0; l <= steps; ++l) {
        const auto& a = cq.cq_iterates[static_cast<std::size_t>(l)];
        max_dev = std::max(max_dev, (a - q.q_iterates[static_cast<std::size_t>(l)]).lpNorm<Eigen::Infinity>());
        max_cq = std::max(max_cq, a.lpNorm<Eigen::Infinity>());
      }
      const double envelope = factor * std::sqrt(e);
      const bool hyp = std::sqrt(e) <= hypothesis;
      qcq.add_row({fmt(n), fmt(e), fmt(f.degree()), fmt(steps), fmt(max_dev), fmt(envelope), fmt(max_cq),
                   fmt_bool(hyp)});
      r.summary["qcq"].push_back({{"n", n}, {"e", e}, {"max_dev", max_dev}, {"max_cq", max_cq}});
      r.assertions.push_back(make_assertion("qcq envelope e=" + fmt(e) + tag, max_dev <= envelope && max_cq <= 1.0,
                                            "max dev " + fmt(max_dev) + " vs " + fmt(envelope) + ", max cq " +
                                                fmt(max_cq)));
    }

    // Non-backtracking versus polynomial AMP across K.
    if (!c.k_list.empty()) {
      ProfileSpec nb_spec;
      if (c.nb_profile) {
        nb_spec = *c.nb_profile;
      } else {
        nb_spec.kind = ProfileKind::kSparseRandom;
        nb_spec.seed = c.seed;
      }
      const Polynomial f = fit_tanh_poly(nb_e, std::numbers::sqrt2, c.params);
      std::vector<double> means;
      for (Index kn : c.k_list) {
        const VarianceProfile nb_profile = cell_profile(nb_spec, n, kn);
        std::vector<double> gap(samples);
        parallel_for(samples, options.jobs, [&](std::size_t s) {
          const CouplingMatrix w = sample_coupling(nb_profile, c.params.t, cell_seed(c.seed, s));
          const PolyAmpTrace z = poly_amp_run(w.w, f, c.nb_k);
          const NbTrace m = nb_run(w.w, f, c.nb_k);
          gap[s] = normalized_sq_distance(m.final, z.iterates.back());
        });
        const MeanStderr ms = mean_stderr(gap);
        nb.add_row({fmt(n), fmt(nb_profile.k_scale()), fmt(nb_e), fmt(f.degree()), fmt(c.nb_k), fmt(c.samples),
                    fmt(ms.mean), fmt(ms.se)});
        r.summary["nb"].push_back({{"n", n}, {"k_scale", nb_profile.k_scale()}, {"mean_gap", ms.mean}, {"se_gap", ms.se}});
        means.push_back(ms.mean);
      }
      if (means.size() >= 2)
        r.assertions.push_back(
            make_assertion("nb-vs-z gap decreasing in K" + tag, strictly_decreasing(means), describe(means)));
    }
  }
  r.extra_tables.emplace_back("qcq", std::move(qcq));
  r.extra_tables.emplace_back("nb", std::move(nb));
  return r;
}

// ---------------------------------------------------------------- dispatch

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  check_tolerance_names(config);
  const auto& e = config.experiment;
  if (e == "fixed_point") return run_fixed_point(config, options);
  if (e == "free_energy_gap") return run_free_energy_gap(config, options);
  if (e == "amp_accuracy") return run_amp_accuracy(config, options);
  if (e == "covariance_scaling") return run_covariance_scaling(config, options);
  if (e == "overlap_concentration") return run_overlap_concentration(config, options);
  if (e == "banded_convergence") return run_banded_convergence(config, options);
  if (e == "spectral_norm") return run_spectral_norm(config, options);
  if (e == "poly_bridge") return run_poly_bridge(config, options);
  throw std::invalid_argument("unknown experiment '" + e + "'");
}

json calibrate_fixtures(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
                        const RunOptions& options) {
  json doc;
  doc["version"] = kFixtureVersion;
  doc["entries"] = json::object();
  for (const auto& [name, config] : configs) {
    const ExperimentResult result = run_experiment(config, options);
    doc["entries"][name] = {{"config", to_json(config)}, {"summary", result.summary}};
  }
  return doc;
}

}  // namespace skvp
