#include "skvp/scalar.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace skvp {

void ModelParams::check() const {
  if (!std::isfinite(t) || !(t > 0.0)) throw std::invalid_argument("model params: t must be positive and finite");
  if (!std::isfinite(h)) throw std::invalid_argument("model params: h must be finite");
}

double g_func(double x, const ModelParams& params, const GaussianQuadrature& quad) {
  if (!(x >= 0.0)) throw std::invalid_argument("g_func: x must be nonnegative");
  const double h = params.h;
  return gauss_expect(
      [h](double z) {
        const double v = std::tanh(z + h);
        return v * v;
      },
      x, quad);
}

Eigen::VectorXd g_vector(const Eigen::VectorXd& q, const ModelParams& params, const GaussianQuadrature& quad) {
  std::unordered_map<double, double> memo;
  Eigen::VectorXd out(q.size());
  for (Index i = 0; i < q.size(); ++i) {
    auto it = memo.find(q(i));
    if (it == memo.end()) it = memo.emplace(q(i), g_func(q(i), params, quad)).first;
    out(i) = it->second;
  }
  return out;
}

double tanh_derivative_mean(double x, const ModelParams& params, const GaussianQuadrature& quad) {
  const double h = params.h;
  return gauss_expect(
      [h](double z) {
        const double a = std::fabs(z + h);
        if (a > 350.0) return 0.0;
        const double c = std::cosh(a);
        return 1.0 / (c * c);
      },
      x, quad);
}

Eigen::VectorXd state_evolution_map(const VarianceProfile& profile, const ModelParams& params,
                                    const Eigen::VectorXd& q, const GaussianQuadrature& quad) {
  if (q.size() != profile.n()) throw std::invalid_argument("state evolution: q has the wrong length");
  return params.t * profile.apply(g_vector(q, params, quad));
}

namespace {

void check_ht_bound(const Eigen::VectorXd& q, Index step) {
  constexpr double kSlack = 1e-9;
  if (q.size() > 0 && q.maxCoeff() >= std::log(2.0) + kSlack) {
    std::ostringstream os;
    os << "state evolution: iterate " << step << " reached " << q.maxCoeff()
       << " >= log 2 under the high-temperature condition";
    throw std::logic_error(os.str());
  }
}

}  // namespace

StateEvolution solve_fixed_point(const VarianceProfile& profile, const ModelParams& params,
                                 const GaussianQuadrature& quad, const FixedPointOptions& options) {
  params.check();
  const bool ht_ok = validate(profile, params.t).ht_ok;
  if (!ht_ok && !options.allow_above_ht)
    throw std::invalid_argument("solve_fixed_point: t violates the high-temperature condition; pass allow_above_ht");

  Eigen::VectorXd q = Eigen::VectorXd::Zero(profile.n());
  if (options.start) {
    if (options.start->size() != profile.n()) throw std::invalid_argument("solve_fixed_point: start has wrong length");
    if ((options.start->array() < 0.0).any()) throw std::invalid_argument("solve_fixed_point: start must be >= 0");
    q = *options.start;
  }

  StateEvolution se;
  se.q_iterates.push_back(q);
  for (Index it = 1; it <= options.max_iter; ++it) {
    Eigen::VectorXd next = state_evolution_map(profile, params, q, quad);
    se.residual = (next - q).lpNorm<Eigen::Infinity>();
    se.iterations = it;
    if (!std::isfinite(se.residual)) break;
    if (se.residual <= options.tol) {
      se.converged = true;
      break;
    }
    q = std::move(next);
    if (options.keep_history) se.q_iterates.push_back(q);
  }
  if (!options.keep_history || se.q_iterates.back() != q) se.q_iterates.push_back(q);
  se.q_star = q;
  if (ht_ok && se.converged) check_ht_bound(q, se.iterations);
  return se;
}

StateEvolution iterate_q(const VarianceProfile& profile, const ModelParams& params, const GaussianQuadrature& quad,
                         Index k) {
  params.check();
  if (k < 0) throw std::invalid_argument("iterate_q: k must be nonnegative");
  const bool ht_ok = validate(profile, params.t).ht_ok;
  StateEvolution se;
  se.q_iterates.reserve(static_cast<std::size_t>(k) + 1);
  se.q_iterates.push_back(Eigen::VectorXd::Zero(profile.n()));
  for (Index l = 0; l < k; ++l) {
    se.q_iterates.push_back(state_evolution_map(profile, params, se.q_iterates.back(), quad));
    if (ht_ok) check_ht_bound(se.q_iterates.back(), l + 1);
  }
  const auto& last = se.q_iterates.back();
  se.residual = (state_evolution_map(profile, params, last, quad) - last).lpNorm<Eigen::Infinity>();
  se.converged = se.residual <= FixedPointOptions{}.tol;
  se.iterations = k;
  return se;
}

Eigen::VectorXd onsager_coeff(const VarianceProfile& profile, const ModelParams& params, const Eigen::VectorXd& q_l,
                              const Eigen::VectorXd& q_lplus1, const GaussianQuadrature& quad) {
  if (q_l.size() != profile.n() || q_lplus1.size() != profile.n())
    throw std::invalid_argument("onsager_coeff: vectors have the wrong length");
  const Eigen::VectorXd expected = state_evolution_map(profile, params, q_l, quad);
  const double gap = (expected - q_lplus1).lpNorm<Eigen::Infinity>();
  if (!(gap <= 1e-9)) {
    std::ostringstream os;
    os << "onsager_coeff: q^{l+1} differs from t S g(q^l) by " << gap;
    throw std::invalid_argument(os.str());
  }
  return params.t * profile.row_sums() - q_lplus1;
}

Eigen::VectorXd onsager_coeff_derivative_form(const VarianceProfile& profile, const ModelParams& params,
                                              const Eigen::VectorXd& q_l, const GaussianQuadrature& quad) {
  if (q_l.size() != profile.n()) throw std::invalid_argument("onsager_coeff: q has the wrong length");
  std::unordered_map<double, double> memo;
  Eigen::VectorXd mean_derivative(q_l.size());
  for (Index i = 0; i < q_l.size(); ++i) {
    auto it = memo.find(q_l(i));
    if (it == memo.end()) it = memo.emplace(q_l(i), tanh_derivative_mean(q_l(i), params, quad)).first;
    mean_derivative(i) = it->second;
  }
  return params.t * profile.apply(mean_derivative);
}

double scalar_fixed_point(double t_eff, double h, const GaussianQuadrature& quad, double tol) {
  if (!(t_eff > 0.0)) throw std::invalid_argument("scalar_fixed_point: t must be positive");
  const ModelParams params{t_eff, h};
  auto f = [&](double q) { return q - t_eff * g_func(q, params, quad); };
  if (f(0.0) == 0.0) return 0.0;
  double lo = 0.0;
  double hi = t_eff;
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (f(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace skvp
