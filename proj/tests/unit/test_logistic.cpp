#include <gtest/gtest.h>

#include <cmath>

#include "oracles/generators.hpp"
#include "rtc/analytics/logistic.hpp"
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

// 2x2 saturated layout with exact counts: cells (a, b) in {0,1}^2, each with
// n rows of which broken[a][b] are 1.
struct Cells {
  DesignMatrix design;
  std::vector<int> y;
};

Cells two_by_two(int n, const int broken[2][2], bool with_interaction) {
  Cells c;
  c.design.terms = {"const", "a", "b"};
  if (with_interaction) c.design.terms.push_back("a:b");
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < n; ++i) {
        std::vector<double> row{1.0, double(a), double(b)};
        if (with_interaction) row.push_back(double(a * b));
        c.design.add_row(row);
        c.y.push_back(i < broken[a][b] ? 1 : 0);
      }
    }
  }
  return c;
}

Cells random_problem(Rng& rng, std::size_t n, std::size_t p) {
  Cells c;
  c.design.terms.push_back("const");
  for (std::size_t j = 1; j < p; ++j) c.design.terms.push_back("x" + std::to_string(j));
  std::vector<double> truth(p);
  for (auto& b : truth) b = 0.5 * gen::normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row{1.0};
    for (std::size_t j = 1; j < p; ++j) row.push_back(gen::normal(rng));
    double eta = 0.0;
    for (std::size_t j = 0; j < p; ++j) eta += row[j] * truth[j];
    c.design.add_row(row);
    c.y.push_back(bernoulli(rng, 1.0 / (1.0 + std::exp(-eta))) ? 1 : 0);
  }
  return c;
}

}  // namespace

TEST(Logistic, InterceptOnlyIsLogitOfMean) {
  DesignMatrix d;
  d.terms = {"const"};
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    d.add_row(std::vector<double>{1.0});
    y.push_back(i < 13);
  }
  const auto m = fit_logistic(d, y);
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(m.coefficient("const"), std::log(13.0 / 27.0), 1e-10);
  EXPECT_NEAR(m.standard_errors[0], std::sqrt(1.0 / 13 + 1.0 / 27), 1e-8);
}

TEST(Logistic, SaturatedInteractionRecoversLogThree) {
  // odds 1, 1, 1, 3: the interaction log odds ratio is exactly ln 3
  const int broken[2][2] = {{50, 50}, {50, 75}};
  const auto c = two_by_two(100, broken, true);
  const auto m = fit_logistic(c.design, c.y);
  EXPECT_NEAR(m.coefficient("a:b"), std::log(3.0), 1e-6);
  EXPECT_NEAR(m.coefficient("const"), 0.0, 1e-8);
  EXPECT_NEAR(m.coefficient("a"), 0.0, 1e-8);
  // Saturated model: Var = sum over the four cells of 1/broken + 1/unbroken
  const double se = std::sqrt(6.0 / 50 + 1.0 / 75 + 1.0 / 25);
  EXPECT_NEAR(m.standard_errors[3], se, 1e-6);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_problem(rng, 80, 4);
    std::vector<double> beta(4);
    for (auto& b : beta) b = gen::normal(rng);
    const auto g = logistic_gradient(c.design, c.y, beta);
    for (std::size_t j = 0; j < beta.size(); ++j) {
      const double h = 1e-6;
      auto up = beta, down = beta;
      up[j] += h;
      down[j] -= h;
      const double fd = (logistic_log_likelihood(c.design, c.y, up) - logistic_log_likelihood(c.design, c.y, down)) / (2 * h);
      EXPECT_LT(std::abs(fd - g[j]), 1e-4 * std::max(1.0, std::abs(g[j]))) << trial << "," << j;
    }
  }
}

TEST(Logistic, OptimumIsStationaryAndMaximal) {
  Rng rng(99);
  const auto c = random_problem(rng, 400, 5);
  const auto m = fit_logistic(c.design, c.y);
  const auto g = logistic_gradient(c.design, c.y, m.coefficients);
  for (double v : g) EXPECT_LT(std::abs(v), 1e-6);
  EXPECT_NEAR(m.log_likelihood, logistic_log_likelihood(c.design, c.y, m.coefficients), 1e-9);
  for (int i = 0; i < 1000; ++i) {
    auto beta = m.coefficients;
    for (auto& b : beta) b += 0.05 * gen::normal(rng);
    EXPECT_LE(logistic_log_likelihood(c.design, c.y, beta), m.log_likelihood + 1e-12);
  }
}

TEST(Logistic, Failures) {
  DesignMatrix dup;
  dup.terms = {"const", "x", "x2"};
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    dup.add_row(std::vector<double>{1.0, double(i), 2.0 * i});
    y.push_back(i % 3 == 0);
  }
  EXPECT_EQ(code_of([&] { fit_logistic(dup, y); }), "rank_deficient");

  DesignMatrix sep;
  sep.terms = {"const", "x"};
  std::vector<int> ys;
  for (int i = 0; i < 20; ++i) {
    sep.add_row(std::vector<double>{1.0, double(i) - 9.5});
    ys.push_back(i >= 10);
  }
  EXPECT_EQ(code_of([&] { fit_logistic(sep, ys); }), "separation");

  DesignMatrix small;
  small.terms = {"a", "b", "c"};
  small.add_row(std::vector<double>{1, 2, 3});
  EXPECT_EQ(code_of([&] { fit_logistic(small, std::vector<int>{1}); }), "too_few_observations");
  EXPECT_EQ(code_of([&] { fit_logistic(sep, std::vector<int>(20, 2)); }), "invalid_outcome");
  EXPECT_EQ(code_of([&] { fit_logistic(sep, std::vector<int>(3, 1)); }), "length_mismatch");
  EXPECT_EQ(code_of([&] { small.add_row(std::vector<double>{1}); }), "row_width");
  LogisticOptions tight;
  tight.max_iter = 1;
  Rng rng(1);
  const auto c = random_problem(rng, 200, 3);
  EXPECT_EQ(code_of([&] { fit_logistic(c.design, c.y, tight); }), "non_convergence");
}

TEST(Logistic, LikelihoodRatioTest) {
  const int broken[2][2] = {{50, 50}, {50, 75}};
  const auto full_cells = two_by_two(100, broken, true);
  const auto add_cells = two_by_two(100, broken, false);
  const auto full = fit_logistic(full_cells.design, full_cells.y);
  const auto additive = fit_logistic(add_cells.design, add_cells.y);
  const auto lr = lr_test(additive, full);
  EXPECT_EQ(lr.df, 1);
  EXPECT_NEAR(lr.chi2, 2 * (full.log_likelihood - additive.log_likelihood), 1e-12);
  EXPECT_NEAR(lr.p_value, stats::chi_square_sf(lr.chi2, 1), 1e-15);
  EXPECT_GT(lr.chi2, 0.0);
  EXPECT_EQ(code_of([&] { lr_test(full, additive); }), "not_nested");
}

TEST(Logistic, TermLookup) {
  const int broken[2][2] = {{10, 20}, {30, 40}};
  const auto c = two_by_two(50, broken, false);
  const auto m = fit_logistic(c.design, c.y);
  EXPECT_EQ(m.term_index("b"), std::optional<std::size_t>(2));
  EXPECT_FALSE(m.term_index("zzz").has_value());
  EXPECT_EQ(code_of([&] { m.coefficient("zzz"); }), "unknown_term");
  EXPECT_EQ(m.covariance.size(), 9u);
}
