#include "tailflow/special_functions.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace tailflow::autograd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031215452;

// erf on |x| <= 3 via the cancellation-free confluent form
//   erf(x) = (2x/sqrt(pi)) e^{-x^2} sum_{n>=0} (2x^2)^n / (2n+1)!!
double erf_series(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  double denom = 1.0;
  for (int n = 1; n < 200; ++n) {
    denom = 2.0 * n + 1.0;
    term *= 2.0 * x2 / denom;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return kTwoOverSqrtPi * x * std::exp(-x2) * sum;
}

// erfc on x >= 3 via the Laplace continued fraction
//   erfc(x) = e^{-x^2} / (x sqrt(pi)) * 1/(1 + q/(1 + 2q/(1 + 3q/(1 + ...))))
// with q = 1/(2x^2), evaluated by modified Lentz.
double erfc_cf(double x) {
  const double q = 0.5 / (x * x);
  const double tiny = 1e-300;
  double f = 1.0, c = f, d = 0.0;
  for (int n = 1; n < 300; ++n) {
    const double a = n * q;
    d = 1.0 + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) / (x * std::sqrt(kPi)) / f;
}

// Lanczos g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

double lgamma_lanczos(double x) {
  // Valid for x >= 0.5.
  const double g = 7.0;
  double acc = kLanczos[0];
  for (int k = 1; k < 9; ++k) acc += kLanczos[k] / (x - 1.0 + k);
  const double t = x - 0.5 + g;
  return 0.5 * std::log(2.0 * kPi) + (x - 0.5) * std::log(t) - t + std::log(acc);
}

}  // namespace

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double r;
  if (ax <= 3.0) {
    r = erf_series(ax);
  } else if (ax < 30.0) {
    r = 1.0 - erfc_cf(ax);
  } else {
    r = 1.0;
  }
  return x < 0.0 ? -r : r;
}

double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x >= 3.0) return x < 30.0 ? erfc_cf(x) : 0.0;
  if (x <= -3.0) return 2.0 - erfc(-x);
  return 1.0 - erf_series(x);
}

double lgamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("lgamma: requires x > 0");
  if (x < 0.5) {
    // Reflection keeps the Lanczos sum in its accurate range.
    return std::log(kPi / std::sin(kPi * x)) - lgamma_lanczos(1.0 - x);
  }
  return lgamma_lanczos(x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic series with Bernoulli numbers through B_12.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = std::log(x) - 0.5 * inv;
  series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
            inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
  return acc + series;
}

}  // namespace tailflow::autograd
