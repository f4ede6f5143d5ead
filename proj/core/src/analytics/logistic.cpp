#include "rtc/analytics/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "rtc/analytics/special.hpp"
#include "rtc/error.hpp"

namespace rtc {

void DesignMatrix::add_row(std::span<const double> row) {
  if (row.size() != terms.size()) fail(ErrorKind::validation, "row_width", "design row width does not match terms");
  values.insert(values.end(), row.begin(), row.end());
  ++rows;
}

std::optional<std::size_t> LogisticModel::term_index(std::string_view term) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i] == term) return i;
  }
  return std::nullopt;
}

double LogisticModel::coefficient(std::string_view term) const {
  const auto i = term_index(term);
  if (!i) fail(ErrorKind::not_found, "unknown_term", "model has no term '" + std::string(term) + "'");
  return coefficients[*i];
}

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const Matrix> as_matrix(const DesignMatrix& design) {
  return {design.values.data(), static_cast<Eigen::Index>(design.rows), static_cast<Eigen::Index>(design.cols())};
}

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_likelihood(const Eigen::VectorXd& eta, std::span<const int> y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1p_exp(eta[i]);
  return ll;
}

void check_inputs(const DesignMatrix& design, std::span<const int> outcomes) {
  if (design.values.size() != design.rows * design.cols()) {
    fail(ErrorKind::validation, "design_shape", "design values do not match rows x terms");
  }
  if (outcomes.size() != design.rows) {
    fail(ErrorKind::validation, "length_mismatch", "outcomes and design rows differ in length");
  }
  for (int y : outcomes) {
    if (y != 0 && y != 1) fail(ErrorKind::validation, "invalid_outcome", "outcomes must be 0 or 1");
  }
}

// Linear predictor beyond this magnitude puts the fitted probability within
// ~1e-11 of the boundary: the likelihood is being maximised at infinity.
constexpr double kSeparationEta = 25.0;

}  // namespace

double logistic_log_likelihood(const DesignMatrix& design, std::span<const int> outcomes,
                               std::span<const double> coefficients) {
  check_inputs(design, outcomes);
  const Eigen::Map<const Eigen::VectorXd> beta(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
  return log_likelihood(as_matrix(design) * beta, outcomes);
}

std::vector<double> logistic_gradient(const DesignMatrix& design, std::span<const int> outcomes,
                                      std::span<const double> coefficients) {
  check_inputs(design, outcomes);
  const auto x = as_matrix(design);
  const Eigen::Map<const Eigen::VectorXd> beta(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = outcomes[i] - sigmoid(eta[i]);
  const Eigen::VectorXd g = x.transpose() * residual;
  return {g.data(), g.data() + g.size()};
}

LogisticModel fit_logistic(const DesignMatrix& design, std::span<const int> outcomes, LogisticOptions options) {
  check_inputs(design, outcomes);
  const auto p = static_cast<Eigen::Index>(design.cols());
  const auto n = static_cast<Eigen::Index>(design.rows);
  if (p == 0) fail(ErrorKind::validation, "no_terms", "design has no terms");
  if (n < p) fail(ErrorKind::validation, "too_few_observations", "fewer observations than terms");

  const auto x = as_matrix(design);
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < p) {
    fail(ErrorKind::numerical, "rank_deficient",
         "design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) + " terms");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = x * beta;
  double ll = log_likelihood(eta, outcomes);
  LogisticModel model;
  model.terms = design.terms;
  model.n_observations = design.rows;

  Eigen::VectorXd mu(n), w(n);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    Eigen::VectorXd residual(n);
    for (Eigen::Index i = 0; i < n; ++i) residual[i] = outcomes[i] - mu[i];
    const Eigen::VectorXd gradient = x.transpose() * residual;
    const Matrix information = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Matrix> ldlt(information);
    if (ldlt.info() != Eigen::Success) {
      fail(ErrorKind::numerical, "separation", "Fisher information became singular; outcomes are separated");
    }
    Eigen::VectorXd step = ldlt.solve(gradient);

    // Step halving keeps every accepted iterate an ascent step. Near the
    // optimum the likelihood is flat to rounding, so tiny dips are ignored.
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd candidate_eta = x * candidate;
    double candidate_ll = log_likelihood(candidate_eta, outcomes);
    const double slack = 1e-12 * (1.0 + std::fabs(ll));
    for (int halvings = 0; candidate_ll < ll - slack && halvings < 40; ++halvings) {
      step *= 0.5;
      candidate = beta + step;
      candidate_eta = x * candidate;
      candidate_ll = log_likelihood(candidate_eta, outcomes);
    }
    beta = candidate;
    eta = candidate_eta;
    ll = std::max(ll, candidate_ll);
    model.iterations = iter;

    if (eta.cwiseAbs().maxCoeff() > kSeparationEta) {
      fail(ErrorKind::numerical, "separation",
           "fitted probabilities reach 0 or 1; the outcome is (quasi-)completely separated");
    }
    if (step.cwiseAbs().maxCoeff() < options.tol) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged) {
    fail(ErrorKind::numerical, "non_convergence",
         "no convergence within " + std::to_string(options.max_iter) + " iterations");
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = sigmoid(eta[i]);
    w[i] = mu[i] * (1.0 - mu[i]);
  }
  const Matrix information = x.transpose() * w.asDiagonal() * x;
  const Matrix covariance = information.ldlt().solve(Matrix::Identity(p, p));
  model.coefficients.assign(beta.data(), beta.data() + p);
  model.covariance.assign(covariance.data(), covariance.data() + p * p);
  for (Eigen::Index j = 0; j < p; ++j) model.standard_errors.push_back(std::sqrt(covariance(j, j)));
  model.log_likelihood = log_likelihood(eta, outcomes);
  return model;
}

LRTestResult lr_test(const LogisticModel& nested, const LogisticModel& full) {
  if (!nested.converged || !full.converged) {
    fail(ErrorKind::numerical, "non_convergence", "both models must have converged");
  }
  const std::set<std::string> full_terms(full.terms.begin(), full.terms.end());
  for (const auto& t : nested.terms) {
    if (!full_terms.contains(t)) fail(ErrorKind::validation, "not_nested", "term '" + t + "' is not in the full model");
  }
  if (nested.n_observations != full.n_observations) {
    fail(ErrorKind::validation, "not_nested", "models were fitted on different observation counts");
  }
  LRTestResult r;
  r.ll_nested = nested.log_likelihood;
  r.ll_full = full.log_likelihood;
  r.df = static_cast<int>(full.terms.size() - nested.terms.size());
  r.chi2 = std::max(0.0, 2.0 * (full.log_likelihood - nested.log_likelihood));
  r.p_value = r.df == 0 ? 1.0 : stats::chi_square_sf(r.chi2, r.df);
  return r;
}

}  // namespace rtc
