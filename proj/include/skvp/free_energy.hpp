#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skvp/profile.hpp"
#include "skvp/quadrature.hpp"
#include "skvp/scalar.hpp"

namespace skvp {

/// log cosh(x) = |x| + log((1 + e^{-2|x|}) / 2), finite for every finite x.
double log_cosh(double x);

/// E log cosh(sqrt(variance) xi + h).
double mean_log_cosh(double variance, double h, const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// log 2 + (1/n) sum_i E log cosh(sqrt(q_i) xi + h) + (t/4n) (1 - g(q))^T S (1 - g(q)),
/// evaluated at a given q.
double free_energy_functional(const VarianceProfile& profile, const ModelParams& params, const Eigen::VectorXd& q,
                              const GaussianQuadrature& quad = GaussianQuadrature::standard());

/// The functional at the fixed point of q = t S g(q). Throws ConvergenceError
/// (carrying the residual) when the fixed-point solver does not converge.
double asymptotic_free_energy(const VarianceProfile& profile, const ModelParams& params,
                              const GaussianQuadrature& quad = GaussianQuadrature::standard(),
                              const FixedPointOptions& options = {});

/// log 2 + E log cosh(sqrt(q) xi + h) + (t/4)(1 - q/t)^2 with q = t g(q)
/// solved by bisection. Rejects t >= log 2.
double scalar_free_energy(const ModelParams& params, const GaussianQuadrature& quad = GaussianQuadrature::standard());

struct FreeEnergyReport {
  /// Asymptotic value; NaN when t is outside the high-temperature range.
  double bold_f = 0.0;
  std::optional<double> f_hat;
  std::optional<double> f_stderr;
  std::optional<double> gap;
  Index n = 0;
  double t = 0.0;
  double h = 0.0;
  Index samples = 0;
  std::uint64_t seed = 0;
  std::string profile_kind;
  Index k_scale = 0;
  /// (1/n) log Z for each disorder draw, in sample order.
  std::vector<double> per_sample;
};

nlohmann::json to_json(const FreeEnergyReport& report);

/// Columns n, t, h, profile_kind, k_scale, bold_f, f_hat, f_stderr, gap,
/// samples, seed.
std::vector<std::string> free_energy_csv_header();
std::vector<std::string> free_energy_csv_row(const FreeEnergyReport& report);

/// Quenched Monte Carlo estimate of (1/n) E log Z.
///
/// Sample s uses the coupling drawn from derive_seed(seed, sample, s) and is
/// solved exactly by enumeration. The mean and the standard error (sample
/// standard deviation over sqrt(samples)) are reduced in sample order, so the
/// report does not depend on `jobs`. Requires samples >= 2 and n within the
/// enumeration cap.
FreeEnergyReport mc_free_energy(const VarianceProfile& profile, const ModelParams& params, Index samples,
                                std::uint64_t seed, int jobs = 1);

}  // namespace skvp
