#include "skvp/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "skvp/csv.hpp"
#include "skvp/rng.hpp"

namespace skvp {

Eigen::MatrixXd sample_goe(Index n, std::uint64_t seed) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    RandomStream rng(seed, StreamTag::kCoupling, static_cast<std::uint64_t>(i));
    for (Index j = i + 1; j < n; ++j) {
      x(i, j) = rng.normal();
      x(j, i) = x(i, j);
    }
  }
  return x;
}

namespace {

CouplingMatrix scale_goe(const Eigen::MatrixXd& x, const VarianceProfile& profile, double t, std::uint64_t seed) {
  CouplingMatrix c;
  c.t = t;
  c.seed = seed;
  c.profile_id = profile.id();
  const Index n = profile.n();
  c.w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    profile.for_each_in_row(i, [&](Index j, double s) {
      if (j > i) {
        const double v = std::sqrt(t * s) * x(i, j);
        c.w(i, j) = v;
        c.w(j, i) = v;
      }
    });
  }
  return c;
}

}  // namespace

CouplingMatrix sample_coupling(const VarianceProfile& profile, double t, std::uint64_t seed) {
  if (!(t > 0.0)) throw std::invalid_argument("sample_coupling: t must be positive");
  return scale_goe(sample_goe(profile.n(), seed), profile, t, seed);
}

std::pair<CouplingMatrix, CouplingMatrix> sample_coupling_pair(const VarianceProfile& first,
                                                               const VarianceProfile& second, double t,
                                                               std::uint64_t seed) {
  if (first.n() != second.n()) throw std::invalid_argument("sample_coupling_pair: profiles differ in size");
  if (!(t > 0.0)) throw std::invalid_argument("sample_coupling_pair: t must be positive");
  const Eigen::MatrixXd x = sample_goe(first.n(), seed);
  return {scale_goe(x, first, t, seed), scale_goe(x, second, t, seed)};
}

GaussianField sample_field(const Eigen::VectorXd& q, std::uint64_t seed) {
  if ((q.array() < 0.0).any() || !q.allFinite())
    throw std::invalid_argument("sample_field: variances must be finite and nonnegative");
  RandomStream rng(seed, StreamTag::kField, 0);
  GaussianField f;
  f.q_used = q;
  f.eta = Eigen::VectorXd::Zero(q.size());
  for (Index i = 0; i < q.size(); ++i) {
    const double z = rng.normal();
    if (q(i) > 0.0) f.eta(i) = std::sqrt(q(i)) * z;
  }
  return f;
}

SpectralBoundReport spectral_report(const CouplingMatrix& w, const VarianceProfile& profile, double delta) {
  if (!(delta > 0.0 && delta <= 0.5)) throw std::invalid_argument("spectral_report: delta must lie in (0, 1/2]");
  if (w.n() != profile.n()) throw std::invalid_argument("spectral_report: size mismatch");
  SpectralBoundReport r;
  r.delta = delta;
  const auto power = symmetric_norm(w.w);
  r.norm_estimate = power.norm;
  r.converged = power.converged;
  r.iterations = power.iterations;

  const double log_n = std::log(static_cast<double>(profile.n()));
  const double c = 6.0 / std::sqrt(std::log1p(delta));
  const double first = 2.0 * std::sqrt(w.t * profile.row_norm());
  r.bound_t = (1.0 + delta) * (first + c * std::sqrt(w.t * profile.max_entry() * log_n));
  r.bound_t_untempered = (1.0 + delta) * (first + c * std::sqrt(profile.max_entry() * log_n));
  r.within_bound = r.norm_estimate <= r.bound_t;
  return r;
}

void write_coupling_triplets(std::ostream& os, const CouplingMatrix& w) {
  CsvTable table;
  table.metadata = {"n=" + std::to_string(w.n()), "t=" + format_double(w.t), "seed=" + std::to_string(w.seed),
                    "profile_id=" + w.profile_id};
  table.header = {"i", "j", "w_ij"};
  for (Index i = 0; i < w.n(); ++i)
    for (Index j = i + 1; j < w.n(); ++j)
      if (w.w(i, j) != 0.0) table.add_row({std::to_string(i), std::to_string(j), format_double(w.w(i, j))});
  table.write(os);
}

CouplingMatrix read_coupling_triplets(std::istream& is) {
  const ParsedCsv csv = read_csv(is);
  if (!csv.meta.count("n")) throw std::invalid_argument("coupling triplets: missing '# n=' metadata");
  CouplingMatrix c;
  const Index n = std::stoll(csv.meta.at("n"));
  if (csv.meta.count("t")) c.t = std::stod(csv.meta.at("t"));
  if (csv.meta.count("seed")) c.seed = std::stoull(csv.meta.at("seed"));
  if (csv.meta.count("profile_id")) c.profile_id = csv.meta.at("profile_id");
  c.w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& row : csv.rows) {
    if (row.size() != 3) throw std::invalid_argument("coupling triplets: expected 3 columns");
    const Index i = std::stoll(row[0]);
    const Index j = std::stoll(row[1]);
    if (i < 0 || i >= j || j >= n) throw std::invalid_argument("coupling triplets: rows must satisfy 0 <= i < j < n");
    c.w(i, j) = std::stod(row[2]);
    c.w(j, i) = c.w(i, j);
  }
  return c;
}

}  // namespace skvp
