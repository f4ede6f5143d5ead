#pragma once

// Two-sample contrasts. Degenerate inputs (zero variance) do not throw: the
// result carries degenerate = true and a conservative statistic.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace rtc {

struct ProportionTestResult {
  std::uint64_t s1 = 0, n1 = 0, s2 = 0, n2 = 0;
  double p1 = 0.0, p2 = 0.0;
  double z_statistic = 0.0;
  double p_value = 1.0;
  /// Pooled rate of 0 or 1: the variance vanishes, z = 0 and p = 1.
  bool degenerate = false;
};

/// Pooled-variance z test, two-sided. Throws validation on n = 0 or s > n.
ProportionTestResult two_proportion_test(std::uint64_t s1, std::uint64_t n1, std::uint64_t s2, std::uint64_t n2);

struct OddsRatioResult {
  /// a, b = successes, failures in group 1; c, d = the same in group 2.
  std::array<std::uint64_t, 4> table{};
  double or_value = 0.0;
  double log_or = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Haldane-Anscombe +0.5 applied because some cell was zero.
  bool corrected = false;
  /// Two zero cells share a row or column; all values are NaN.
  bool undefined = false;
};

OddsRatioResult odds_ratio(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

struct AnovaResult {
  double f_statistic = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p_value = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  /// Zero within-group variance. F is 0 (p = 1) when the group means also
  /// agree, +inf (p = 0) otherwise.
  bool degenerate = false;
};

/// Groups may hold raw binary outcomes or per-group rates alike.
/// Throws validation if fewer than two groups or a group has < 2 values.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

struct TTestResult {
  double t_statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double mean1 = 0.0;
  double mean2 = 0.0;
  /// Both samples have zero variance.
  bool degenerate = false;
};

/// Welch statistic with Satterthwaite df.
TTestResult welch_t_test(std::span<const double> sample1, std::span<const double> sample2);
/// Classic equal-variance t test (df = n1 + n2 - 2).
TTestResult pooled_t_test(std::span<const double> sample1, std::span<const double> sample2);

}  // namespace rtc
