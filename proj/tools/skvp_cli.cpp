// Command-line front end: profile and coupling export, fixed point, free
// energy, AMP traces, the experiment harness and fixture calibration.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "skvp/amp.hpp"
#include "skvp/experiments.hpp"
#include "skvp/free_energy.hpp"
#include "skvp/gibbs.hpp"
#include "skvp/profile.hpp"
#include "skvp/profile_io.hpp"
#include "skvp/sampler.hpp"
#include "skvp/scalar.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skvp;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool assert_enabled = false;
  int jobs = 1;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

ExperimentConfig load_config(const Common& common) {
  if (common.config.empty()) throw std::runtime_error("--config is required");
  ExperimentConfig c = parse_experiment_config(read_json(common.config));
  if (common.seed) c.seed = *common.seed;
  return c;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// The output path: --out as a directory when given, else the config's
// `output`, else `fallback` in the working directory.
fs::path output_path(const Common& common, const ExperimentConfig& c, const std::string& fallback) {
  const fs::path name = c.output.empty() ? fs::path(fallback) : fs::path(c.output);
  if (common.out.empty()) return name;
  fs::create_directories(common.out);
  return fs::path(common.out) / name.filename();
}

fs::path sibling(const fs::path& main, const std::string& suffix) {
  return main.parent_path() / (main.stem().string() + "_" + suffix + main.extension().string());
}

void write_table(const fs::path& path, CsvTable table) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  table.metadata.insert(table.metadata.begin(), "timestamp=" + timestamp());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  table.write(os);
}

int report(const ExperimentResult& r, bool assert_enabled) {
  bool ok = true;
  for (const auto& a : r.assertions) {
    std::cout << (a.passed ? "PASS  " : "FAIL  ") << a.name << "  (" << a.detail << ")\n";
    ok = ok && a.passed;
  }
  return (!assert_enabled || ok) ? 0 : 1;
}

Index first_k(const ExperimentConfig& c) { return c.k_list.empty() ? c.profile.k : c.k_list.front(); }

VarianceProfile config_profile(const ExperimentConfig& c) {
  return build_profile(with_size(c.profile, c.n_list.front(), first_k(c)));
}

int cmd_profile(const Common& common) {
  const ExperimentConfig c = load_config(common);
  const VarianceProfile profile = config_profile(c);
  const AssumptionReport rep = validate(profile, c.params.t);
  json j = {{"n", profile.n()},
            {"k_scale", profile.k_scale()},
            {"c_s", profile.c_s()},
            {"c_card", profile.c_card()},
            {"row_norm", profile.row_norm()},
            {"max_row_support", profile.max_row_support()},
            {"t", c.params.t},
            {"ht_ok", rep.ht_ok},
            {"ht_margin", rep.ht_margin},
            {"card_ok", rep.card_ok},
            {"klogn_ok", rep.klogn_ok},
            {"messages", rep.messages}};
  std::cout << j.dump(2) << "\n";
  const fs::path path = output_path(common, c, "profile.csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  write_profile_triplets(os, profile);
  return 0;
}

int cmd_sample(const Common& common) {
  const ExperimentConfig c = load_config(common);
  const VarianceProfile profile = config_profile(c);
  const CouplingMatrix w = sample_coupling(profile, c.params.t, c.seed);
  const fs::path path = output_path(common, c, "coupling.csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  write_coupling_triplets(os, w);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_fixed_point(const Common& common, bool allow_above_ht) {
  const ExperimentConfig c = load_config(common);
  const VarianceProfile profile = config_profile(c);
  FixedPointOptions options;
  options.keep_history = true;
  options.allow_above_ht = allow_above_ht;
  const StateEvolution se = solve_fixed_point(profile, c.params, GaussianQuadrature::standard(), options);
  CsvTable table;
  table.metadata = {"n=" + std::to_string(profile.n()), "t=" + format_double(c.params.t),
                    "h=" + format_double(c.params.h)};
  table.header = {"l", "i", "q_l_i"};
  for (std::size_t l = 0; l < se.q_iterates.size(); ++l)
    for (Index i = 0; i < profile.n(); ++i)
      table.add_row({std::to_string(l), std::to_string(i), format_double(se.q_iterates[l](i))});
  const fs::path path = output_path(common, c, "state_evolution.csv");
  write_table(path, table);
  const Eigen::VectorXd& q = *se.q_star;
  json j = {{"converged", se.converged},
            {"iterations", se.iterations},
            {"residual", se.residual},
            {"q_star", std::vector<double>(q.data(), q.data() + q.size())}};
  std::ofstream(sibling(path, "q_star").replace_extension(".json")) << j.dump(2) << "\n";
  std::cout << "converged=" << se.converged << " iterations=" << se.iterations << " residual=" << se.residual << "\n";
  return se.converged ? 0 : 1;
}

int cmd_free_energy(const Common& common) {
  const ExperimentConfig c = load_config(common);
  const VarianceProfile profile = config_profile(c);
  json j;
  if (profile.n() <= ExactGibbs::kEnumerationCap) {
    j = to_json(mc_free_energy(profile, c.params, std::max<Index>(c.samples, 2), c.seed, common.jobs));
  } else {
    j = {{"bold_f", asymptotic_free_energy(profile, c.params)}, {"n", profile.n()}, {"t", c.params.t},
         {"h", c.params.h}};
  }
  if (c.params.t < std::log(2.0)) j["scalar_f"] = scalar_free_energy(c.params);
  std::cout << j.dump(2) << "\n";
  if (!common.out.empty() || !c.output.empty()) {
    const fs::path path = output_path(common, c, "free_energy.json");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream(path) << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_amp(const Common& common) {
  const ExperimentConfig c = load_config(common);
  const VarianceProfile profile = config_profile(c);
  const CouplingMatrix w = sample_coupling(profile, c.params.t, c.seed);
  const AmpTrace trace = amp_run(w, profile, c.params, GaussianQuadrature::standard(), c.k_iter);
  const fs::path path = output_path(common, c, "amp_trace.csv");
  std::ostringstream trace_csv;
  write_iterates_csv(trace_csv, trace.iterates);
  std::ofstream(path) << "# timestamp=" << timestamp() << "\n" << trace_csv.str();
  if (profile.n() <= ExactGibbs::kEnumerationCap) {
    SpinSystem system;
    system.w = w.w;
    system.h = c.params.h;
    const Eigen::VectorXd m = ExactGibbs(system).magnetizations();
    CsvTable summary;
    summary.header = {"k", "amp_error", "seed"};
    for (Index l = 0; l <= trace.k(); ++l)
      summary.add_row({std::to_string(l), format_double(amp_error(m, trace, l)), std::to_string(c.seed)});
    write_table(sibling(path, "summary"), summary);
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_experiment(const Common& common, const std::string& name) {
  ExperimentConfig c = load_config(common);
  if (!name.empty() && name != c.experiment)
    throw std::runtime_error("config describes '" + c.experiment + "', not '" + name + "'");
  const ExperimentResult r = run_experiment(c, RunOptions{common.jobs});
  const fs::path path = output_path(common, c, c.experiment + ".csv");
  write_table(path, r.table);
  for (const auto& [suffix, table] : r.extra_tables) write_table(sibling(path, suffix), table);
  std::cout << "wrote " << path.string() << "\n";
  return report(r, common.assert_enabled);
}

int cmd_calibrate(const Common& common, const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no calibration configs in " + dir);
  std::vector<std::pair<std::string, ExperimentConfig>> configs;
  for (const auto& f : files) configs.emplace_back(f.stem().string(), parse_experiment_config(read_json(f.string())));
  const json doc = calibrate_fixtures(configs, RunOptions{common.jobs});
  const fs::path out = common.out.empty() ? fs::path("fixtures/calibration.json") : fs::path(common.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream(out) << doc.dump(2) << "\n";
  std::cout << "wrote " << out.string() << " (" << configs.size() << " entries)\n";
  return 0;
}

void add_common(CLI::App* app, Common& common, bool with_assert) {
  app->add_option("--config", common.config, "Experiment config (JSON)");
  app->add_option("--out", common.out, "Output directory");
  app->add_option("--seed", common.seed, "Master seed, overrides the config");
  app->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
  if (with_assert) app->add_flag("--assert", common.assert_enabled, "Exit nonzero when an assertion fails");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sherrington-Kirkpatrick model with a variance profile"};
  app.require_subcommand(1);
  Common common;

  auto* profile = app.add_subcommand("profile", "Build a profile, report assumptions, export triplets");
  add_common(profile, common, false);
  auto* sample = app.add_subcommand("sample", "Sample one coupling matrix and export triplets");
  add_common(sample, common, false);
  auto* fixed = app.add_subcommand("fixed-point", "Solve the state-evolution fixed point");
  add_common(fixed, common, false);
  bool allow_above_ht = false;
  fixed->add_flag("--allow-above-ht", allow_above_ht, "Run even when t violates the high-temperature condition");
  auto* free = app.add_subcommand("free-energy", "Asymptotic and Monte Carlo free energy");
  add_common(free, common, false);
  auto* amp = app.add_subcommand("amp", "Run AMP on one sampled coupling");
  add_common(amp, common, false);
  auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
  std::string experiment_name;
  experiment->add_option("name", experiment_name, "Experiment name")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  add_common(experiment, common, true);
  auto* fixtures = app.add_subcommand("fixtures", "Fixture maintenance");
  fixtures->require_subcommand(1);
  auto* calibrate = fixtures->add_subcommand("calibrate", "Run the calibration configs and write the fixture file");
  std::string calibration_dir = "configs/calibration";
  calibrate->add_option("--config-dir", calibration_dir, "Directory of calibration configs");
  add_common(calibrate, common, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*profile) return cmd_profile(common);
    if (*sample) return cmd_sample(common);
    if (*fixed) return cmd_fixed_point(common, allow_above_ht);
    if (*free) return cmd_free_energy(common);
    if (*amp) return cmd_amp(common);
    if (*experiment) return cmd_experiment(common, experiment_name);
    if (*calibrate) return cmd_calibrate(common, calibration_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
