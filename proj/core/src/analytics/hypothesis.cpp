#include "rtc/analytics/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rtc/analytics/special.hpp"
#include "rtc/error.hpp"

namespace rtc {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sum_sq_dev(std::span<const double> xs, double m) {
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s;
}

void require_two(std::span<const double> xs, const char* which) {
  if (xs.size() < 2) fail(ErrorKind::validation, "too_few_observations", std::string(which) + " needs at least 2 values");
}

}  // namespace

ProportionTestResult two_proportion_test(std::uint64_t s1, std::uint64_t n1, std::uint64_t s2, std::uint64_t n2) {
  if (n1 == 0 || n2 == 0) fail(ErrorKind::validation, "empty_group", "proportion test needs n >= 1 in both groups");
  if (s1 > n1 || s2 > n2) fail(ErrorKind::validation, "invalid_count", "successes exceed group size");
  ProportionTestResult r{s1, n1, s2, n2};
  r.p1 = static_cast<double>(s1) / static_cast<double>(n1);
  r.p2 = static_cast<double>(s2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(s1 + s2) / static_cast<double>(n1 + n2);
  if (pooled == 0.0 || pooled == 1.0) {
    r.degenerate = true;
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  r.z_statistic = (r.p1 - r.p2) / se;
  r.p_value = std::min(1.0, 2.0 * stats::normal_sf(std::fabs(r.z_statistic)));
  return r;
}

OddsRatioResult odds_ratio(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  OddsRatioResult r;
  r.table = {a, b, c, d};
  if ((a == 0 && b == 0) || (c == 0 && d == 0) || (a == 0 && c == 0) || (b == 0 && d == 0)) {
    r.undefined = true;
    r.or_value = r.log_or = r.std_error = r.ci_low = r.ci_high = kNaN;
    return r;
  }
  double fa = static_cast<double>(a), fb = static_cast<double>(b);
  double fc = static_cast<double>(c), fd = static_cast<double>(d);
  if (a == 0 || b == 0 || c == 0 || d == 0) {
    r.corrected = true;
    fa += 0.5;
    fb += 0.5;
    fc += 0.5;
    fd += 0.5;
  }
  r.or_value = (fa * fd) / (fb * fc);
  r.log_or = std::log(r.or_value);
  r.std_error = std::sqrt(1.0 / fa + 1.0 / fb + 1.0 / fc + 1.0 / fd);
  r.ci_low = std::exp(r.log_or - kZ975 * r.std_error);
  r.ci_high = std::exp(r.log_or + kZ975 * r.std_error);
  return r;
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) fail(ErrorKind::validation, "too_few_groups", "ANOVA needs at least 2 groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    require_two(g, "each ANOVA group");
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  grand /= static_cast<double>(n);

  AnovaResult r;
  for (const auto& g : groups) {
    const double m = mean(g);
    r.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    r.ss_within += sum_sq_dev(g, m);
  }
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n - groups.size());
  if (r.ss_within == 0.0) {
    r.degenerate = true;
    if (r.ss_between == 0.0) {
      r.f_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.f_statistic = kInf;
      r.p_value = 0.0;
    }
    return r;
  }
  r.f_statistic = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
  r.p_value = stats::f_sf(r.f_statistic, r.df_between, r.df_within);
  return r;
}

namespace {

TTestResult zero_variance_result(TTestResult r) {
  r.degenerate = true;
  if (r.mean1 == r.mean2) {
    r.t_statistic = 0.0;
    r.p_value = 1.0;
  } else {
    r.t_statistic = r.mean1 > r.mean2 ? kInf : -kInf;
    r.p_value = 0.0;
  }
  return r;
}

}  // namespace

TTestResult welch_t_test(std::span<const double> sample1, std::span<const double> sample2) {
  require_two(sample1, "sample1");
  require_two(sample2, "sample2");
  const double n1 = static_cast<double>(sample1.size());
  const double n2 = static_cast<double>(sample2.size());
  TTestResult r;
  r.mean1 = mean(sample1);
  r.mean2 = mean(sample2);
  const double v1 = sum_sq_dev(sample1, r.mean1) / (n1 - 1.0);
  const double v2 = sum_sq_dev(sample2, r.mean2) / (n2 - 1.0);
  const double a = v1 / n1;
  const double b = v2 / n2;
  if (a + b == 0.0) {
    r.df = n1 + n2 - 2.0;
    return zero_variance_result(r);
  }
  r.t_statistic = (r.mean1 - r.mean2) / std::sqrt(a + b);
  r.df = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
  r.p_value = stats::student_t_two_sided(r.t_statistic, r.df);
  return r;
}

TTestResult pooled_t_test(std::span<const double> sample1, std::span<const double> sample2) {
  require_two(sample1, "sample1");
  require_two(sample2, "sample2");
  const double n1 = static_cast<double>(sample1.size());
  const double n2 = static_cast<double>(sample2.size());
  TTestResult r;
  r.mean1 = mean(sample1);
  r.mean2 = mean(sample2);
  r.df = n1 + n2 - 2.0;
  const double sp2 = (sum_sq_dev(sample1, r.mean1) + sum_sq_dev(sample2, r.mean2)) / r.df;
  if (sp2 == 0.0) return zero_variance_result(r);
  r.t_statistic = (r.mean1 - r.mean2) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
  r.p_value = stats::student_t_two_sided(r.t_statistic, r.df);
  return r;
}

}  // namespace rtc
