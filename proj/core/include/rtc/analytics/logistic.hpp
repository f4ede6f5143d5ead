#pragma once

// Bernoulli maximum likelihood by Newton/IRLS, plus the nested-model
// likelihood-ratio test.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtc {

/// Row-major observation x term matrix.
struct DesignMatrix {
  std::vector<std::string> terms;
  std::size_t rows = 0;
  std::vector<double> values;

  std::size_t cols() const noexcept { return terms.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * terms.size() + c]; }
  void add_row(std::span<const double> row);
};

struct LogisticOptions {
  int max_iter = 100;
  /// Converged once the largest coefficient step is below this.
  double tol = 1e-8;
};

struct LogisticModel {
  std::vector<std::string> terms;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  /// Inverse Fisher information at the optimum, row-major.
  std::vector<double> covariance;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t n_observations = 0;

  std::optional<std::size_t> term_index(std::string_view term) const;
  double coefficient(std::string_view term) const;
};

/// Throws numerical "rank_deficient", "separation" or "non_convergence", and
/// validation when there are fewer observations than terms.
LogisticModel fit_logistic(const DesignMatrix& design, std::span<const int> outcomes, LogisticOptions options = {});

double logistic_log_likelihood(const DesignMatrix& design, std::span<const int> outcomes,
                               std::span<const double> coefficients);
std::vector<double> logistic_gradient(const DesignMatrix& design, std::span<const int> outcomes,
                                      std::span<const double> coefficients);

struct LRTestResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  double ll_nested = 0.0;
  double ll_full = 0.0;
};

/// Throws validation "not_nested" when the nested terms are not a subset of
/// the full terms or the observation counts differ, numerical
/// "non_convergence" when either model failed to converge.
LRTestResult lr_test(const LogisticModel& nested, const LogisticModel& full);

}  // namespace rtc
