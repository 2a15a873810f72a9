#include "skvp/free_energy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "skvp/csv.hpp"
#include "skvp/errors.hpp"
#include "skvp/gibbs.hpp"
#include "skvp/parallel.hpp"
#include "skvp/rng.hpp"
#include "skvp/sampler.hpp"

namespace skvp {

double log_cosh(double x) {
  const double a = std::fabs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double mean_log_cosh(double variance, double h, const GaussianQuadrature& quad) {
  return gauss_expect([h](double z) { return log_cosh(z + h); }, variance, quad);
}

double free_energy_functional(const VarianceProfile& profile, const ModelParams& params, const Eigen::VectorXd& q,
                              const GaussianQuadrature& quad) {
  params.check();
  const Index n = profile.n();
  if (q.size() != n) throw std::invalid_argument("free_energy_functional: q has the wrong length");
  double entropy = 0.0;
  for (Index i = 0; i < n; ++i) entropy += mean_log_cosh(q(i), params.h, quad);
  const Eigen::VectorXd rest = Eigen::VectorXd::Ones(n) - g_vector(q, params, quad);
  const double dn = static_cast<double>(n);
  return std::numbers::ln2 + entropy / dn + params.t / (4.0 * dn) * profile.bilinear(rest, rest);
}

double asymptotic_free_energy(const VarianceProfile& profile, const ModelParams& params,
                              const GaussianQuadrature& quad, const FixedPointOptions& options) {
  const StateEvolution se = solve_fixed_point(profile, params, quad, options);
  if (!se.converged) {
    std::ostringstream os;
    os << "asymptotic_free_energy: fixed point did not converge (residual " << se.residual << ")";
    throw ConvergenceError(os.str(), se.residual);
  }
  return free_energy_functional(profile, params, *se.q_star, quad);
}

double scalar_free_energy(const ModelParams& params, const GaussianQuadrature& quad) {
  params.check();
  if (!(params.t < std::numbers::ln2)) throw std::invalid_argument("scalar_free_energy: requires t < log 2");
  const double q = scalar_fixed_point(params.t, params.h, quad, 1e-12);
  const double r = 1.0 - q / params.t;
  return std::numbers::ln2 + mean_log_cosh(q, params.h, quad) + params.t / 4.0 * r * r;
}

nlohmann::json to_json(const FreeEnergyReport& r) {
  nlohmann::json j;
  j["bold_f"] = std::isfinite(r.bold_f) ? nlohmann::json(r.bold_f) : nlohmann::json(nullptr);
  j["f_hat"] = r.f_hat ? nlohmann::json(*r.f_hat) : nlohmann::json(nullptr);
  j["f_stderr"] = r.f_stderr ? nlohmann::json(*r.f_stderr) : nlohmann::json(nullptr);
  j["gap"] = r.gap ? nlohmann::json(*r.gap) : nlohmann::json(nullptr);
  j["n"] = r.n;
  j["t"] = r.t;
  j["h"] = r.h;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["profile_kind"] = r.profile_kind;
  j["k_scale"] = r.k_scale;
  return j;
}

std::vector<std::string> free_energy_csv_header() {
  return {"n", "t", "h", "profile_kind", "k_scale", "bold_f", "f_hat", "f_stderr", "gap", "samples", "seed"};
}

std::vector<std::string> free_energy_csv_row(const FreeEnergyReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return {std::to_string(r.n),     format_double(r.t),      format_double(r.h),    r.profile_kind,
          std::to_string(r.k_scale), format_double(r.bold_f), opt(r.f_hat),          opt(r.f_stderr),
          opt(r.gap),              std::to_string(r.samples), std::to_string(r.seed)};
}

FreeEnergyReport mc_free_energy(const VarianceProfile& profile, const ModelParams& params, Index samples,
                                std::uint64_t seed, int jobs) {
  params.check();
  if (samples < 2) throw std::invalid_argument("mc_free_energy: samples must be at least 2");
  const Index n = profile.n();
  if (n > ExactGibbs::kEnumerationCap)
    throw CapacityError("mc_free_energy: n = " + std::to_string(n) + " exceeds the enumeration cap");

  FreeEnergyReport r;
  r.n = n;
  r.t = params.t;
  r.h = params.h;
  r.samples = samples;
  r.seed = seed;
  r.profile_kind = to_string(profile.kind());
  r.k_scale = profile.k_scale();
  r.bold_f = validate(profile, params.t).ht_ok ? asymptotic_free_energy(profile, params)
                                               : std::numeric_limits<double>::quiet_NaN();

  r.per_sample.assign(static_cast<std::size_t>(samples), 0.0);
  parallel_for(static_cast<std::size_t>(samples), jobs, [&](std::size_t s) {
    const CouplingMatrix w = sample_coupling(profile, params.t, derive_seed(seed, StreamTag::kSample, s));
    SpinSystem system;
    system.w = w.w;
    system.h = params.h;
    r.per_sample[s] = log_partition(system) / static_cast<double>(n);
  });

  double mean = 0.0;
  for (double v : r.per_sample) mean += v;
  mean /= static_cast<double>(samples);
  double ss = 0.0;
  for (double v : r.per_sample) ss += (v - mean) * (v - mean);
  r.f_hat = mean;
  r.f_stderr = std::sqrt(ss / static_cast<double>(samples - 1)) / std::sqrt(static_cast<double>(samples));
  if (std::isfinite(r.bold_f)) r.gap = mean - r.bold_f;
  return r;
}

}  // namespace skvp
