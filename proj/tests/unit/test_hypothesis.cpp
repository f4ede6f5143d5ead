#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rtc/analytics/hypothesis.hpp"
#include "rtc/analytics/special.hpp"
#include "rtc/error.hpp"
#include "rtc/rng.hpp"

using namespace rtc;

namespace {

std::string code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

}  // namespace

TEST(Proportions, FiftyVersusFortyOneAtFiveHundred) {
  const auto r = two_proportion_test(250, 500, 205, 500);
  const double pooled = 455.0 / 1000.0;
  const double se = std::sqrt(pooled * (1 - pooled) * (2.0 / 500));
  EXPECT_NEAR(r.z_statistic, 0.09 / se, 1e-12);
  EXPECT_NEAR(r.p_value, 2 * stats::normal_sf(0.09 / se), 1e-15);
  EXPECT_LT(r.p_value, 0.01);
  EXPECT_FALSE(r.degenerate);
}

TEST(Proportions, EqualRatesGivePOne) {
  const auto r = two_proportion_test(30, 100, 60, 200);
  EXPECT_DOUBLE_EQ(r.z_statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(Proportions, AntisymmetryOverRandomInstances) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t n1 = 1 + uniform_index(rng, 300), n2 = 1 + uniform_index(rng, 300);
    const std::uint64_t s1 = uniform_index(rng, n1 + 1), s2 = uniform_index(rng, n2 + 1);
    const auto a = two_proportion_test(s1, n1, s2, n2);
    const auto b = two_proportion_test(s2, n2, s1, n1);
    EXPECT_DOUBLE_EQ(a.z_statistic, -b.z_statistic);
    EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
    EXPECT_GE(a.p_value, 0.0);
    EXPECT_LE(a.p_value, 1.0);
  }
}

TEST(Proportions, DegenerateAndInvalid) {
  const auto zero = two_proportion_test(0, 10, 0, 20);
  EXPECT_TRUE(zero.degenerate);
  EXPECT_EQ(zero.p_value, 1.0);
  EXPECT_TRUE(two_proportion_test(5, 5, 9, 9).degenerate);
  EXPECT_EQ(code_of([] { two_proportion_test(1, 0, 1, 2); }), "empty_group");
  EXPECT_EQ(code_of([] { two_proportion_test(3, 2, 1, 2); }), "invalid_count");
}

TEST(OddsRatio, WoolfInterval) {
  const auto r = odds_ratio(10, 20, 30, 40);
  EXPECT_NEAR(r.or_value, 400.0 / 600.0, 1e-15);
  const double se = std::sqrt(1.0 / 10 + 1.0 / 20 + 1.0 / 30 + 1.0 / 40);
  EXPECT_NEAR(r.std_error, se, 1e-15);
  EXPECT_NEAR(r.ci_low, std::exp(std::log(400.0 / 600.0) - 1.959963984540054 * se), 1e-12);
  EXPECT_NEAR(r.ci_high, std::exp(std::log(400.0 / 600.0) + 1.959963984540054 * se), 1e-12);
  EXPECT_FALSE(r.corrected);
}

TEST(OddsRatio, ZeroCellCorrectionAndUndefined) {
  const auto r = odds_ratio(0, 10, 5, 5);
  EXPECT_TRUE(r.corrected);
  EXPECT_NEAR(r.or_value, (0.5 * 5.5) / (10.5 * 5.5), 1e-15);
  const auto u = odds_ratio(0, 0, 5, 5);
  EXPECT_TRUE(u.undefined);
  EXPECT_TRUE(std::isnan(u.or_value));
  EXPECT_TRUE(odds_ratio(0, 4, 0, 7).undefined);
}

TEST(OddsRatio, SwappingGroupsInvertsRatio) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t a = 1 + uniform_index(rng, 50), b = 1 + uniform_index(rng, 50);
    const std::uint64_t c = 1 + uniform_index(rng, 50), d = 1 + uniform_index(rng, 50);
    const auto x = odds_ratio(a, b, c, d);
    const auto y = odds_ratio(c, d, a, b);
    EXPECT_NEAR(x.log_or, -y.log_or, 1e-12);
    EXPECT_NEAR(x.std_error, y.std_error, 1e-15);
  }
}

TEST(Anova, HandWorkedExample) {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {4, 5, 6}};
  const auto r = one_way_anova(groups);
  EXPECT_NEAR(r.ss_between, 13.5, 1e-12);
  EXPECT_NEAR(r.ss_within, 4.0, 1e-12);
  EXPECT_NEAR(r.f_statistic, 13.5, 1e-12);
  EXPECT_EQ(r.df_between, 1.0);
  EXPECT_EQ(r.df_within, 4.0);
  EXPECT_NEAR(r.p_value, stats::f_sf(13.5, 1, 4), 1e-15);
}

TEST(Anova, TwoGroupsMatchPooledTSquared) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a, b;
    for (std::size_t k = 0; k < 3 + uniform_index(rng, 20); ++k) a.push_back(uniform_unit(rng));
    for (std::size_t k = 0; k < 3 + uniform_index(rng, 20); ++k) b.push_back(uniform_unit(rng) + 0.1);
    const std::vector<std::vector<double>> groups{a, b};
    const auto f = one_way_anova(groups);
    const auto t = pooled_t_test(a, b);
    EXPECT_NEAR(f.f_statistic, t.t_statistic * t.t_statistic, 1e-9 * (1 + f.f_statistic));
    EXPECT_NEAR(f.p_value, t.p_value, 1e-10);
  }
}

TEST(Anova, DegenerateAndInvalid) {
  const std::vector<std::vector<double>> same{{1, 1}, {1, 1}};
  auto r = one_way_anova(same);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_value, 1.0);
  const std::vector<std::vector<double>> apart{{1, 1}, {2, 2}};
  r = one_way_anova(apart);
  EXPECT_TRUE(std::isinf(r.f_statistic));
  EXPECT_EQ(r.p_value, 0.0);
  const std::vector<std::vector<double>> one{{1, 2}};
  EXPECT_EQ(code_of([&] { one_way_anova(one); }), "too_few_groups");
  const std::vector<std::vector<double>> tiny{{1, 2}, {3}};
  EXPECT_EQ(code_of([&] { one_way_anova(tiny); }), "too_few_observations");
}

TEST(TTest, WelchMatchesFormula) {
  const std::vector<double> a{2.1, 3.4, 1.9, 5.6, 4.4, 3.3};
  const std::vector<double> b{6.2, 7.1, 5.9, 8.8, 6.4, 7.7, 9.0, 6.6};
  const double va = var(a) / a.size(), vb = var(b) / b.size();
  const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.t_statistic, t, 1e-12);
  EXPECT_NEAR(r.df, df, 1e-10);
  EXPECT_NEAR(r.p_value, stats::student_t_two_sided(t, df), 1e-14);
}

TEST(TTest, ZeroVariance) {
  const std::vector<double> a{1, 1, 1}, b{1, 1}, c{2, 2};
  EXPECT_EQ(welch_t_test(a, b).p_value, 1.0);
  const auto r = welch_t_test(a, c);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_LT(r.t_statistic, 0.0);
}
