#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skvp/csv.hpp"
#include "skvp/profile_io.hpp"
#include "skvp/scalar.hpp"

namespace skvp {

/// A single experiment description, read from a JSON document. Unknown keys
/// are rejected, as are unknown tolerance names for the chosen experiment.
///
///   {
///     "experiment": "amp_accuracy",
///     "profile": {"kind": "mean_field"},
///     "params": {"t": 0.4, "h": 0.3},
///     "n_list": [16],
///     "samples": 100,
///     "seed": 2024,
///     "k_iter": 12,
///     "k_check": [2, 4, 6, 8]
///   }
struct ExperimentConfig {
  std::string experiment;
  ProfileSpec profile;
  ModelParams params;
  std::vector<Index> n_list;
  std::vector<Index> k_list;
  Index samples = 1;
  std::uint64_t seed = 0;
  std::string output;
  std::map<std::string, double> tolerances;

  std::vector<double> t_list;
  std::vector<double> u_list;
  std::vector<double> e_list;
  Index k_iter = 12;
  std::vector<Index> k_check;
  double delta = 0.1;
  Index replicas = 100;
  std::optional<ProfileSpec> nb_profile;
  Index nb_k = 4;
  std::optional<double> nb_e;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// Names accepted in the `experiment` field.
const std::vector<std::string>& experiment_names();

struct AssertionOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  /// Main table. Deterministic given the config.
  CsvTable table;
  /// Secondary tables, written next to the main one with the name as suffix.
  std::vector<std::pair<std::string, CsvTable>> extra_tables;
  /// Aggregates used by the assertions and by fixture calibration.
  nlohmann::json summary;
  std::vector<AssertionOutcome> assertions;

  bool all_passed() const;
};

struct RunOptions {
  /// Workers used to fan out seeds; results do not depend on it.
  int jobs = 1;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

ExperimentResult run_fixed_point(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_free_energy_gap(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_amp_accuracy(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_covariance_scaling(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_overlap_concentration(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_banded_convergence(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_spectral_norm(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_poly_bridge(const ExperimentConfig& config, const RunOptions& options = {});

/// Sample mean and standard error (sample standard deviation over sqrt(N)).
struct MeanStderr {
  double mean = 0.0;
  double se = 0.0;
};
MeanStderr mean_stderr(const std::vector<double>& values);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Exact E ||R12 - q||_n^2 for two independent replicas, from the Gibbs means
/// m and second moments M2 = <s s^T>:
///   (1/n) sum_i [t^2 (S (M2.M2) S)_ii - 2 t q_i (S m^2)_i + q_i^2].
double exact_overlap_deviation(const VarianceProfile& profile, double t, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& m, const Eigen::MatrixXd& second_moment);

/// Calibration document: for every config in `configs`, the config itself
/// and the summary of its run, under the config's file stem.
nlohmann::json calibrate_fixtures(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
                                  const RunOptions& options = {});

/// Current layout version of the calibration document.
inline constexpr int kFixtureVersion = 1;

}  // namespace skvp
