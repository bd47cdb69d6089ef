#include "tfb/quantiles.hpp"

#include "tfb/types.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tfb {

namespace {

constexpr double kTiny = 1e-300;

// lgamma(a) - [(a - 1/2) log a - a + log(2 pi)/2]
double stirling_correction(double a) {
  if (a >= 10.0) {
    const double r = 1.0 / a, r2 = r * r;
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680))));
  }
  return std::lgamma(a) - ((a - 0.5) * std::log(a) - a + 0.5 * std::log(2.0 * std::numbers::pi));
}

// log of x^a e^{-x} / Gamma(a), written so that large a near x keeps precision.
double log_gamma_prefactor(double a, double x) {
  const double t = (x - a) / a;
  return a * (std::log1p(t) - t) - stirling_correction(a) + 0.5 * std::log(a / (2.0 * std::numbers::pi));
}

double lower_series(double a, double x) {
  // P(a,x) = x^a e^{-x} / Gamma(a + 1) * sum_n x^n / ((a+1)...(a+n))
  double term = 1.0, sum = 1.0;
  for (int n = 1; n < 10000000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return std::exp(log_gamma_prefactor(a, x)) * sum / a;
}

double upper_fraction(double a, double x) {
  // Modified Lentz evaluation of the continued fraction for Q(a, x).
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(log_gamma_prefactor(a, x)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || std::isnan(x)) {
    std::ostringstream msg;
    msg << "incomplete gamma needs a > 0 and x >= 0 (got a=" << a << ", x=" << x << ")";
    throw UsageError(msg.str());
  }
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? lower_series(a, x) : 1.0 - upper_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - lower_series(a, x) : upper_fraction(a, x);
}

double chi_sq_cdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

double chi_sq_pdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * df, y = 0.5 * x;
  // d/dx P(a, x/2) = (1/2) y^{a-1} e^{-y} / Gamma(a)
  return 0.5 * std::exp(log_gamma_prefactor(a, y)) / y;
}

double chi_sq_quantile(double q, long df) {
  if (!(q > 0.0 && q < 1.0)) {
    std::ostringstream msg;
    msg << "quantile level must lie in (0, 1), got " << q;
    throw UsageError(msg.str());
  }
  if (df < 1) throw UsageError("chi-squared degrees of freedom must be >= 1");
  const auto k = static_cast<double>(df);
  const bool upper = q > 0.5;
  // Residual in whichever tail is smaller keeps precision near q -> 1.
  auto residual = [&](double x) {
    return upper ? (1.0 - q) - regularized_gamma_q(0.5 * k, 0.5 * x)
                 : chi_sq_cdf(x, k) - q;
  };

  const double z = normal_quantile(q);
  const double h = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3);
  if (!(x > 0.0)) x = 1e-3;

  double lo = 0.0, hi = x;
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double r = residual(x);
    if (r == 0.0) return x;
    if (r < 0.0) lo = std::max(lo, x); else hi = std::min(hi, x);
    const double f = chi_sq_pdf(x, k);
    double next = f > 0.0 ? x - r / f : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "probability must lie in (0, 1), got " << p;
    throw UsageError(msg.str());
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double r = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double r0 = p - 0.5;
    const double r = r0 * r0;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * r0 /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double r = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  // Halley refinement; the residual is taken in the tail nearer to p.
  const double e = p < 0.5 ? 0.5 * std::erfc(-x / std::numbers::sqrt2) - p
                           : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace tfb
