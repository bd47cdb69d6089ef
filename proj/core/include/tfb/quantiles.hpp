#pragma once

namespace tfb {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

double chi_sq_cdf(double x, double df);
double chi_sq_pdf(double x, double df);

/// Inverse chi-squared CDF (Newton on P(df/2, x/2) from a Wilson-Hilferty
/// start, safeguarded by bisection).
double chi_sq_quantile(double q, long df);

double normal_cdf(double x);
/// Inverse standard normal CDF (Acklam's rational approximation and one
/// Halley step).
double normal_quantile(double p);

}  // namespace tfb
