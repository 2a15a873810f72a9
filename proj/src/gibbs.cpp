#include "skvp/gibbs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "skvp/errors.hpp"
#include "skvp/parallel.hpp"
#include "skvp/rng.hpp"

namespace skvp {

namespace {

constexpr std::uint64_t kResyncMask = 4095;

// H(s) = s^T J s / 2 + b^T s with J = sqrt(u) W and b = h + sqrt(1-u) eta.
struct Effective {
  Eigen::MatrixXd j;
  Eigen::VectorXd b;
};

Effective effective(const SpinSystem& s) {
  Effective e;
  const Index n = s.n();
  if (s.u == 1.0) {
    e.j = s.w;
    e.b = Eigen::VectorXd::Constant(n, s.h);
  } else {
    e.j = std::sqrt(s.u) * s.w;
    e.b = (s.h + std::sqrt(1.0 - s.u) * s.eta.array()).matrix();
  }
  return e;
}

// Visits the 2^low pairs (s, -s) whose spins low..n-2 are fixed by the bits
// of `high` and whose spin n-1 is +1, in Gray-code order of spins 0..low-1.
// visit(sigma, quad, lin) receives H(s) = quad + lin and H(-s) = quad - lin.
template <class Visit>
void pair_walk(const Effective& e, Index low, std::uint64_t high, Visit&& visit) {
  const Index n = e.j.rows();
  Eigen::VectorXd sigma(n);
  for (Index i = 0; i < n - 1; ++i) sigma(i) = (i >= low && ((high >> (i - low)) & 1U)) ? 1.0 : -1.0;
  sigma(n - 1) = 1.0;
  Eigen::VectorXd local(n);
  double quad = 0.0;
  double lin = 0.0;
  auto resync = [&] {
    local.noalias() = e.j * sigma;
    quad = 0.5 * sigma.dot(local);
    lin = e.b.dot(sigma);
  };
  resync();
  visit(sigma, quad, lin);
  const std::uint64_t steps = std::uint64_t{1} << low;
  for (std::uint64_t k = 1; k < steps; ++k) {
    const auto i = static_cast<Index>(std::countr_zero(k));
    const double s = sigma(i);
    quad -= 2.0 * s * local(i);
    lin -= 2.0 * s * e.b(i);
    sigma(i) = -s;
    local.noalias() += (-2.0 * s) * e.j.col(i);
    if ((k & kResyncMask) == 0) resync();
    visit(sigma, quad, lin);
  }
}

struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add_pair(double quad, double lin) {
    const double top = quad + std::fabs(lin);
    if (top > max) {
      sum = std::isfinite(max) ? sum * std::exp(max - top) : 0.0;
      max = top;
    }
    sum += std::exp(quad + lin - max) + std::exp(quad - lin - max);
  }
  void merge(const LogSumExp& other) {
    if (other.sum == 0.0) return;
    if (other.max > max) {
      sum = (std::isfinite(max) ? sum * std::exp(max - other.max) : 0.0) + other.sum;
      max = other.max;
    } else {
      sum += other.sum * std::exp(other.max - max);
    }
  }
  double value() const { return max + std::log(sum); }
};

// Splits the walk over spins 0..n-2 into 2^b blocks by the top b of them.
struct Partition {
  Index low = 0;
  std::uint64_t blocks = 1;
};

Partition partition(Index n, int jobs) {
  Index b = 0;
  while ((Index{1} << b) < jobs && b < n - 1) ++b;
  return {n - 1 - b, std::uint64_t{1} << b};
}

template <class Acc, class Visit, class Merge>
Acc run_blocks(const Effective& e, int jobs, Visit&& make_visit, Merge&& merge) {
  const Index n = e.j.rows();
  const Partition p = partition(n, jobs);
  std::vector<Acc> parts(p.blocks);
  parallel_for(p.blocks, jobs, [&](std::size_t block) {
    Acc& acc = parts[block];
    auto visit = make_visit(acc);
    pair_walk(e, p.low, block, visit);
  });
  Acc total = std::move(parts[0]);
  for (std::size_t block = 1; block < parts.size(); ++block) merge(total, parts[block]);
  return total;
}

struct MomentAcc {
  Eigen::VectorXd m;
  Eigen::MatrixXd second;
};

}  // namespace

SpinConfiguration SpinConfiguration::from_bits(std::uint64_t bits, Index n) {
  if (n > 64) throw std::invalid_argument("SpinConfiguration::from_bits: n above 64");
  SpinConfiguration c;
  c.spins.resize(n);
  for (Index i = 0; i < n; ++i) c.spins(i) = ((bits >> i) & 1U) ? 1.0 : -1.0;
  return c;
}

std::uint64_t SpinConfiguration::to_bits() const {
  if (n() > 64) throw std::invalid_argument("SpinConfiguration::to_bits: n above 64");
  std::uint64_t bits = 0;
  for (Index i = 0; i < n(); ++i)
    if (spins(i) > 0.0) bits |= std::uint64_t{1} << i;
  return bits;
}

void SpinSystem::check() const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("SpinSystem: u must lie in [0, 1]");
  if (!std::isfinite(h)) throw std::invalid_argument("SpinSystem: h must be finite");
  if (w.rows() != w.cols()) throw std::invalid_argument("SpinSystem: W must be square");
  if (!w.allFinite()) throw std::invalid_argument("SpinSystem: W must be finite");
  for (Index i = 0; i < n(); ++i) {
    if (w(i, i) != 0.0) throw std::invalid_argument("SpinSystem: W must have a zero diagonal");
    for (Index j = i + 1; j < n(); ++j)
      if (w(i, j) != w(j, i)) throw std::invalid_argument("SpinSystem: W must be symmetric");
  }
  if (u < 1.0) {
    if (eta.size() != n()) throw std::invalid_argument("SpinSystem: eta of length n is required when u < 1");
    if (!eta.allFinite()) throw std::invalid_argument("SpinSystem: eta must be finite");
  } else if (eta.size() != 0 && eta.size() != n()) {
    throw std::invalid_argument("SpinSystem: eta length does not match W");
  }
}

SpinSystem SpinSystem::restricted(std::span<const Index> keep) const {
  SpinSystem out;
  out.h = h;
  out.u = u;
  const auto m = static_cast<Index>(keep.size());
  out.w.resize(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) out.w(a, b) = w(keep[a], keep[b]);
  if (eta.size() == n()) {
    out.eta.resize(m);
    for (Index a = 0; a < m; ++a) out.eta(a) = eta(keep[a]);
  }
  return out;
}

double hamiltonian(const SpinSystem& system, const SpinConfiguration& sigma) {
  system.check();
  if (sigma.n() != system.n()) throw std::invalid_argument("hamiltonian: configuration length mismatch");
  const auto& s = sigma.spins;
  double value = 0.5 * std::sqrt(system.u) * s.dot(system.w * s) + system.h * s.sum();
  if (system.u < 1.0) value += std::sqrt(1.0 - system.u) * system.eta.dot(s);
  return value;
}

ExactGibbs::ExactGibbs(SpinSystem system, EnumerationOptions options)
    : system_(std::move(system)), options_(options) {
  system_.check();
  if (system_.n() > kEnumerationCap) {
    throw CapacityError("ExactGibbs: n = " + std::to_string(system_.n()) + " exceeds the enumeration cap of " +
                        std::to_string(kEnumerationCap) + "; use glauber_chain (MCMC) for larger systems");
  }
  if (system_.n() == 0) {
    log_z_ = 0.0;
    return;
  }
  const Effective e = effective(system_);
  const LogSumExp acc = run_blocks<LogSumExp>(
      e, options_.jobs,
      [](LogSumExp& a) { return [&a](const Eigen::VectorXd&, double quad, double lin) { a.add_pair(quad, lin); }; },
      [](LogSumExp& total, const LogSumExp& part) { total.merge(part); });
  log_z_ = acc.value();
  if (!std::isfinite(log_z_)) throw std::runtime_error("ExactGibbs: log Z is not finite");
}

Eigen::VectorXd ExactGibbs::magnetizations() const {
  const Index n = system_.n();
  if (n == 0) return {};
  const Effective e = effective(system_);
  const double log_z = log_z_;
  const Eigen::VectorXd m = run_blocks<Eigen::VectorXd>(
      e, options_.jobs,
      [n, log_z](Eigen::VectorXd& acc) {
        acc = Eigen::VectorXd::Zero(n);
        return [&acc, log_z](const Eigen::VectorXd& sigma, double quad, double lin) {
          const double diff = std::exp(quad + lin - log_z) - std::exp(quad - lin - log_z);
          acc.noalias() += diff * sigma;
        };
      },
      [](Eigen::VectorXd& total, const Eigen::VectorXd& part) { total += part; });
  return m;
}

GibbsStats ExactGibbs::stats() const {
  const Index n = system_.n();
  GibbsStats out;
  if (n == 0) return out;
  const Effective e = effective(system_);
  const double log_z = log_z_;
  MomentAcc acc = run_blocks<MomentAcc>(
      e, options_.jobs,
      [n, log_z](MomentAcc& a) {
        a.m = Eigen::VectorXd::Zero(n);
        a.second = Eigen::MatrixXd::Zero(n, n);
        return [&a, log_z](const Eigen::VectorXd& sigma, double quad, double lin) {
          const double plus = std::exp(quad + lin - log_z);
          const double minus = std::exp(quad - lin - log_z);
          a.m.noalias() += (plus - minus) * sigma;
          a.second.selfadjointView<Eigen::Lower>().rankUpdate(sigma, plus + minus);
        };
      },
      [](MomentAcc& total, const MomentAcc& part) {
        total.m += part.m;
        total.second += part.second;
      });
  acc.second.triangularView<Eigen::StrictlyUpper>() = acc.second.transpose();
  out.cov = acc.second - acc.m * acc.m.transpose();
  out.m = std::move(acc.m);
  return out;
}

std::vector<SpinConfiguration> ExactGibbs::sample_replicas(Index count, std::uint64_t seed) const {
  if (count < 0) throw std::invalid_argument("sample_replicas: count must be nonnegative");
  const Index n = system_.n();
  std::vector<SpinConfiguration> out(static_cast<std::size_t>(count));
  if (count == 0) return out;
  RandomStream rng(seed, StreamTag::kReplica, 0);
  std::vector<double> draws(static_cast<std::size_t>(count));
  for (auto& d : draws) d = rng.uniform();
  std::vector<std::size_t> order(draws.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return draws[a] < draws[b]; });

  if (n == 0) {
    for (auto& c : out) c.spins.resize(0);
    return out;
  }

  // Ascending integer walk: x -> x + 1 clears the trailing ones and sets the
  // next bit.
  const Effective e = effective(system_);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd local(n);
  double energy = 0.0;
  auto resync = [&] {
    local.noalias() = e.j * sigma;
    energy = 0.5 * sigma.dot(local) + e.b.dot(sigma);
  };
  auto flip = [&](Index i) {
    const double s = sigma(i);
    energy -= 2.0 * s * (local(i) + e.b(i));
    sigma(i) = -s;
    local.noalias() += (-2.0 * s) * e.j.col(i);
  };
  resync();

  const std::uint64_t total = std::uint64_t{1} << n;
  std::size_t next = 0;
  double cumulative = 0.0;
  std::uint64_t last_positive = 0;
  for (std::uint64_t x = 0; x < total && next < order.size(); ++x) {
    if (x > 0) {
      const auto top = static_cast<Index>(std::countr_zero(x));
      for (Index i = 0; i <= top; ++i) flip(i);
      if ((x & kResyncMask) == 0) resync();
    }
    const double p = std::exp(energy - log_z_);
    if (p > 0.0) last_positive = x;
    cumulative += p;
    while (next < order.size() && draws[order[next]] < cumulative) {
      out[order[next]] = SpinConfiguration::from_bits(x, n);
      ++next;
    }
  }
  // Draws above the rounded total mass land on the last reachable state.
  for (; next < order.size(); ++next) out[order[next]] = SpinConfiguration::from_bits(last_positive, n);
  return out;
}

double log_partition(const SpinSystem& system, EnumerationOptions options) {
  return ExactGibbs(system, options).log_z();
}

GibbsStats stats(const SpinSystem& system, EnumerationOptions options) { return ExactGibbs(system, options).stats(); }

GibbsStats cavity_stats(const SpinSystem& system, std::span<const Index> removed, EnumerationOptions options) {
  system.check();
  const Index n = system.n();
  std::vector<bool> gone(static_cast<std::size_t>(n), false);
  for (Index i : removed) {
    if (i < 0 || i >= n) throw std::invalid_argument("cavity_stats: index out of range");
    gone[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i)
    if (!gone[static_cast<std::size_t>(i)]) keep.push_back(i);
  const GibbsStats sub = stats(system.restricted(keep), options);
  GibbsStats out;
  out.m = Eigen::VectorXd::Zero(n);
  out.cov = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    out.m(keep[a]) = sub.m(static_cast<Index>(a));
    for (std::size_t b = 0; b < keep.size(); ++b)
      out.cov(keep[a], keep[b]) = sub.cov(static_cast<Index>(a), static_cast<Index>(b));
  }
  return out;
}

std::vector<SpinConfiguration> sample_replicas(const SpinSystem& system, Index count, std::uint64_t seed) {
  return ExactGibbs(system).sample_replicas(count, seed);
}

OverlapSample overlap(const VarianceProfile& profile, double t, const SpinConfiguration& sigma1,
                      const SpinConfiguration& sigma2) {
  if (sigma1.n() != sigma2.n() || sigma1.n() != profile.n())
    throw std::invalid_argument("overlap: length mismatch");
  return {t * profile.apply(sigma1.spins.cwiseProduct(sigma2.spins))};
}

CavityAnalysis cavity_analysis(const SpinSystem& system, EnumerationOptions options) {
  const ExactGibbs full(system);
  const Index n = system.n();
  CavityAnalysis out;
  out.m = full.magnetizations();
  out.tap_residual = Eigen::VectorXd::Zero(n);
  out.cavity_shift = Eigen::MatrixXd::Zero(n, n);
  const double root_u = std::sqrt(system.u);
  const double root_rest = std::sqrt(1.0 - system.u);
  // One cavity per site; sites are independent, so they fan out over jobs.
  parallel_for(static_cast<std::size_t>(n), options.jobs, [&](std::size_t site) {
    const auto i = static_cast<Index>(site);
    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(n - 1));
    for (Index l = 0; l < n; ++l)
      if (l != i) keep.push_back(l);
    const Eigen::VectorXd sub = ExactGibbs(system.restricted(keep)).magnetizations();
    Eigen::VectorXd cavity = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < keep.size(); ++a) cavity(keep[a]) = sub(static_cast<Index>(a));
    double field = root_u * system.w.row(i).dot(cavity) + system.h;
    if (system.u < 1.0) field += root_rest * system.eta(i);
    out.tap_residual(i) = out.m(i) - std::tanh(field);
    for (Index l = 0; l < n; ++l)
      if (l != i) out.cavity_shift(i, l) = (out.m(l) - cavity(l)) * (out.m(l) - cavity(l));
  });
  return out;
}

Eigen::VectorXd tap_residual(const SpinSystem& system, EnumerationOptions options) {
  return cavity_analysis(system, options).tap_residual;
}

namespace {

template <class Record>
void run_glauber(const SpinSystem& system, const GlauberOptions& options, std::uint64_t seed, Record&& record) {
  system.check();
  if (options.burn_in < 0 || options.sweeps <= options.burn_in)
    throw std::invalid_argument("glauber_chain: requires sweeps > burn_in >= 0");
  if (options.thin < 1) throw std::invalid_argument("glauber_chain: thin must be positive");
  const Index n = system.n();
  const Effective e = effective(system);
  RandomStream rng(seed, StreamTag::kGlauber, 0);
  Eigen::VectorXd sigma(n);
  for (Index i = 0; i < n; ++i) sigma(i) = rng.uniform() < 0.5 ? 1.0 : -1.0;
  for (Index sweep = 0; sweep < options.sweeps; ++sweep) {
    for (Index i = 0; i < n; ++i) {
      const double field = e.j.col(i).dot(sigma) + e.b(i);
      const double p_plus = 0.5 * (1.0 + std::tanh(field));
      sigma(i) = rng.uniform() < p_plus ? 1.0 : -1.0;
    }
    if (sweep >= options.burn_in && (sweep - options.burn_in) % options.thin == 0) record(sigma);
  }
}

}  // namespace

std::vector<SpinConfiguration> glauber_chain(const SpinSystem& system, const GlauberOptions& options,
                                             std::uint64_t seed) {
  std::vector<SpinConfiguration> out;
  run_glauber(system, options, seed, [&](const Eigen::VectorXd& sigma) { out.push_back({sigma}); });
  return out;
}

Eigen::VectorXd glauber_magnetization(const SpinSystem& system, const GlauberOptions& options, std::uint64_t seed) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(system.n());
  Index count = 0;
  run_glauber(system, options, seed, [&](const Eigen::VectorXd& sigma) {
    sum += sigma;
    ++count;
  });
  return sum / static_cast<double>(count);
}

}  // namespace skvp
