#pragma once

// Special functions behind every p-value in the analytics module. Only
// elementary functions from <cmath> are used (exp, log, sqrt, pow).
//
// Accuracy, checked against 50-digit references in the test suite:
//   log_gamma          relative 1e-14 for x > 0
//   gamma_p / gamma_q  absolute 1e-14
//   beta_inc           absolute 1e-14
// so the derived CDFs are good to well under 1e-12 absolute.

namespace rtc::stats {

double log_gamma(double x);

/// Regularized lower and upper incomplete gamma functions, a > 0, x >= 0.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b), a, b > 0, 0 <= x <= 1.
double beta_inc(double a, double b, double x);

double erfc(double x);
double erf(double x);

double normal_cdf(double x);
/// Upper tail, accurate far into the tail (no 1 - cdf cancellation).
double normal_sf(double x);

double chi_square_cdf(double x, double df);
double chi_square_sf(double x, double df);

double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);

/// Two-sided p-value of a Student t statistic.
double student_t_two_sided(double t, double df);

}  // namespace rtc::stats
