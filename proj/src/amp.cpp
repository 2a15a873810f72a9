#include "skvp/amp.hpp"

#include <sstream>
#include <stdexcept>

#include "skvp/csv.hpp"
#include "skvp/errors.hpp"

namespace skvp {

namespace {

constexpr double kOnsagerAgreement = 1e-12;
constexpr Index kNbCap = 2048;

void check_finite(const Eigen::VectorXd& x, Index step, const char* who) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << who << ": non-finite iterate at step " << step;
    throw DivergenceError(os.str(), static_cast<int>(step));
  }
}

}  // namespace

AmpTrace amp_run(const CouplingMatrix& w, const VarianceProfile& profile, const ModelParams& params,
                 const GaussianQuadrature& quad, Index k) {
  params.check();
  if (k < 1) throw std::invalid_argument("amp_run: k must be at least 1");
  if (w.n() != profile.n()) throw std::invalid_argument("amp_run: coupling and profile sizes differ");
  const Index n = profile.n();
  const StateEvolution se = iterate_q(profile, params, quad, k);

  AmpTrace trace;
  trace.params = params;
  trace.profile_id = profile.id();
  trace.coupling_seed = w.seed;
  trace.iterates.push_back(Eigen::VectorXd::Zero(n));
  trace.iterates.push_back(w.w * Eigen::VectorXd::Constant(n, std::tanh(params.h)));
  trace.onsager_used.push_back(Eigen::VectorXd::Zero(n));
  check_finite(trace.iterates.back(), 1, "amp_run");

  for (Index l = 1; l < k; ++l) {
    const auto& q_l = se.q_iterates[static_cast<std::size_t>(l)];
    const auto& q_next = se.q_iterates[static_cast<std::size_t>(l + 1)];
    Eigen::VectorXd coeff = onsager_coeff(profile, params, q_l, q_next, quad);
    const Eigen::VectorXd alt = onsager_coeff_derivative_form(profile, params, q_l, quad);
    const double gap = (coeff - alt).lpNorm<Eigen::Infinity>();
    if (!(gap <= kOnsagerAgreement)) {
      std::ostringstream os;
      os << "amp_run: Onsager forms disagree by " << gap << " at step " << l;
      throw std::logic_error(os.str());
    }
    const Eigen::VectorXd current = tanh_shifted(trace.iterates[static_cast<std::size_t>(l)], params.h);
    const Eigen::VectorXd previous = tanh_shifted(trace.iterates[static_cast<std::size_t>(l - 1)], params.h);
    Eigen::VectorXd next = w.w * current - coeff.cwiseProduct(previous);
    check_finite(next, l + 1, "amp_run");
    trace.iterates.push_back(std::move(next));
    trace.onsager_used.push_back(std::move(coeff));
  }
  return trace;
}

PolyAmpTrace poly_amp_run(const Eigen::MatrixXd& w, const Polynomial& f, Index k) {
  if (k < 1) throw std::invalid_argument("poly_amp_run: k must be at least 1");
  if (w.rows() != w.cols()) throw std::invalid_argument("poly_amp_run: W must be square");
  const Index n = w.rows();
  const Polynomial df = f.derivative();
  const Eigen::MatrixXd w2 = w.cwiseAbs2();

  PolyAmpTrace trace;
  trace.f = f;
  trace.iterates.push_back(Eigen::VectorXd::Zero(n));
  trace.iterates.push_back(w * Eigen::VectorXd::Constant(n, f(0.0)));
  check_finite(trace.iterates.back(), 1, "poly_amp_run");
  for (Index l = 1; l < k; ++l) {
    const auto& z = trace.iterates[static_cast<std::size_t>(l)];
    const auto& z_prev = trace.iterates[static_cast<std::size_t>(l - 1)];
    const Eigen::VectorXd onsager = w2 * df.apply(z);
    Eigen::VectorXd next = w * f.apply(z) - onsager.cwiseProduct(f.apply(z_prev));
    check_finite(next, l + 1, "poly_amp_run");
    trace.iterates.push_back(std::move(next));
  }
  return trace;
}

NbTrace nb_run(const Eigen::MatrixXd& w, const Polynomial& f, Index k, bool keep_history) {
  if (k < 1) throw std::invalid_argument("nb_run: k must be at least 1");
  if (w.rows() != w.cols()) throw std::invalid_argument("nb_run: W must be square");
  const Index n = w.rows();
  if (n > kNbCap) throw CapacityError("nb_run: n = " + std::to_string(n) + " exceeds the cap of 2048");

  NbTrace trace;
  Eigen::MatrixXd level = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd weighted(n, n);
  Eigen::VectorXd totals(n);
  // weighted(i, r) = W_ir f(level(i, r)); totals(i) = its row sum.
  auto fold = [&](const Eigen::MatrixXd& current) {
    weighted = w.cwiseProduct(f.apply(current));
    totals = weighted.rowwise().sum();
  };
  for (Index l = 0; l + 1 < k; ++l) {
    if (keep_history) trace.family.push_back(level);
    fold(level);
    level = -weighted.transpose();
    level.rowwise() += totals.transpose();
    if (!level.allFinite()) throw DivergenceError("nb_run: non-finite message at level " + std::to_string(l + 1),
                                                  static_cast<int>(l + 1));
  }
  if (keep_history) trace.family.push_back(level);
  fold(level);
  trace.final = totals;
  check_finite(trace.final, k, "nb_run");
  trace.last_level = std::move(level);
  return trace;
}

double normalized_sq_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("normalized_sq_distance: length mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double amp_error(const Eigen::VectorXd& m_exact, const AmpTrace& trace, Index k) {
  if (k < 0 || k > trace.k()) throw std::invalid_argument("amp_error: k outside the trace");
  return normalized_sq_distance(m_exact, trace.estimate(k));
}

void write_iterates_csv(std::ostream& os, const std::vector<Eigen::VectorXd>& iterates,
                        const std::vector<std::string>& metadata) {
  CsvTable table;
  table.metadata = metadata;
  table.header = {"l", "i", "x_l_i"};
  for (std::size_t l = 0; l < iterates.size(); ++l)
    for (Index i = 0; i < iterates[l].size(); ++i)
      table.add_row({std::to_string(l), std::to_string(i), format_double(iterates[l](i))});
  table.write(os);
}

}  // namespace skvp
