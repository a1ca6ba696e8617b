#include "tailflow/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailflow/rng.hpp"
#include "tailflow/special_functions.hpp"

namespace tailflow::dists {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kLogTwoPi = 1.8378770664093454835606594728112353;
constexpr double kSqrt2 = 1.4142135623730950488016887242096981;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_u(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile: u must lie in (0,1)");
}

double lbeta(double a, double b) {
  return autograd::lgamma(a) + autograd::lgamma(b) - autograd::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h;
}

double std_gaussian_pdf(double x) {
  return std::exp(-0.5 * x * x - 0.5 * kLogTwoPi);
}

// Acklam's rational approximation to the standard normal quantile, accurate
// to about 1.2e-9; Newton against erfc-based tails finishes the job.
double acklam(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) return -acklam(1.0 - p);
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double student_t_log_density_std(double nu, double x) {
  return autograd::lgamma(0.5 * (nu + 1.0)) - autograd::lgamma(0.5 * nu) -
         0.5 * std::log(nu * kPi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

}  // namespace

namespace detail {

double gaussian_cdf_std(double x) {
  return 0.5 * autograd::erfc(-x / kSqrt2);
}

double gaussian_quantile_std(double u) {
  // Newton on the matching tail of the cdf; both sides are computed through
  // erfc so the residual stays relatively accurate out to u ~ 1e-300.
  const bool upper = u > 0.5;
  const double s = upper ? 1.0 - u : u;  // lower-tail mass of |x|
  double x = std::fabs(acklam(s));       // positive tail abscissa
  for (int it = 0; it < 6; ++it) {
    const double tail = 0.5 * autograd::erfc(x / kSqrt2);  // P(X > x)
    const double f = std_gaussian_pdf(x);
    if (f <= 0.0) break;
    const double step = (tail - s) / f;
    x += step;
    if (std::fabs(step) < 1e-13 * (1.0 + std::fabs(x))) break;
  }
  return upper ? x : -x;
}

double ibeta_reg(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - lbeta(b, a)) *
                   betacf(b, a, 1.0 - x) / b;
}

double student_t_tail_std(double nu, double x) {
  if (x < 0.0) return 1.0 - student_t_tail_std(nu, -x);
  if (x == 0.0) return 0.5;
  const double z = nu / (nu + x * x);
  return 0.5 * ibeta_reg(0.5 * nu, 0.5, z);
}

double student_t_quantile_std(double nu, double u) {
  if (u == 0.5) return 0.0;
  if (u < 0.5) return -student_t_quantile_std(nu, 1.0 - u);
  const double s = 1.0 - u;  // upper-tail mass, in (0, 0.5)

  // Bracket the root by doubling, then bisect a little and polish with
  // Newton in tail space. tail() is decreasing in x.
  double lo = 0.0, hi = 1.0;
  while (student_t_tail_std(nu, hi) > s) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  for (int it = 0; it < 20; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_tail_std(nu, mid) > s)
      lo = mid;
    else
      hi = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    const double tail = student_t_tail_std(nu, x);
    const double f = std::exp(student_t_log_density_std(nu, x));
    double next;
    if (f > 0.0) {
      next = x + (tail - s) / f;
      if (next <= lo || next >= hi) next = 0.5 * (lo + hi);  // keep the bracket
    } else {
      next = 0.5 * (lo + hi);
    }
    if (student_t_tail_std(nu, next) > s)
      lo = std::max(lo, next);
    else
      hi = std::min(hi, next);
    const double step = std::fabs(next - x);
    x = next;
    if (step < 1e-12 * (1.0 + std::fabs(x))) break;
  }
  return x;
}

}  // namespace detail

Distribution1D Distribution1D::gaussian(double mean, double sigma) {
  require(sigma > 0.0, "gaussian: sigma must be > 0");
  return {Kind::gaussian, mean, sigma, 0.0};
}
Distribution1D Distribution1D::student_t(double nu, double loc, double scale) {
  require(nu > 0.0, "student_t: nu must be > 0");
  require(scale > 0.0, "student_t: scale must be > 0");
  return {Kind::student_t, nu, loc, scale};
}
Distribution1D Distribution1D::cauchy(double loc, double scale) {
  require(scale > 0.0, "cauchy: scale must be > 0");
  return {Kind::cauchy, loc, scale, 0.0};
}
Distribution1D Distribution1D::uniform(double a, double b) {
  require(b > a, "uniform: need b > a");
  return {Kind::uniform, a, b, 0.0};
}
Distribution1D Distribution1D::exponential(double rate) {
  require(rate > 0.0, "exponential: rate must be > 0");
  return {Kind::exponential, rate, 0.0, 0.0};
}

double log_density(const Distribution1D& d, double x) {
  switch (d.kind) {
    case Kind::gaussian: {
      const double t = (x - d.p1) / d.p2;
      return -0.5 * kLogTwoPi - std::log(d.p2) - 0.5 * t * t;
    }
    case Kind::student_t: {
      const double t = (x - d.p2) / d.p3;
      return student_t_log_density_std(d.p1, t) - std::log(d.p3);
    }
    case Kind::cauchy: {
      const double t = (x - d.p1) / d.p2;
      return -std::log(kPi * d.p2 * (1.0 + t * t));
    }
    case Kind::uniform:
      return (x >= d.p1 && x <= d.p2) ? -std::log(d.p2 - d.p1) : kNegInf;
    case Kind::exponential:
      return x >= 0.0 ? std::log(d.p1) - d.p1 * x : kNegInf;
  }
  throw std::logic_error("log_density: unknown kind");
}

double density(const Distribution1D& d, double x) { return std::exp(log_density(d, x)); }

double cdf(const Distribution1D& d, double x) {
  switch (d.kind) {
    case Kind::gaussian:
      return detail::gaussian_cdf_std((x - d.p1) / d.p2);
    case Kind::student_t:
      return 1.0 - detail::student_t_tail_std(d.p1, (x - d.p2) / d.p3);
    case Kind::cauchy:
      return 0.5 + std::atan((x - d.p1) / d.p2) / kPi;
    case Kind::uniform:
      return std::clamp((x - d.p1) / (d.p2 - d.p1), 0.0, 1.0);
    case Kind::exponential:
      return x > 0.0 ? -std::expm1(-d.p1 * x) : 0.0;
  }
  throw std::logic_error("cdf: unknown kind");
}

double quantile(const Distribution1D& d, double u) {
  check_u(u);
  switch (d.kind) {
    case Kind::gaussian:
      return d.p1 + d.p2 * detail::gaussian_quantile_std(u);
    case Kind::student_t:
      return d.p2 + d.p3 * detail::student_t_quantile_std(d.p1, u);
    case Kind::cauchy:
      return d.p1 + d.p2 * std::tan(kPi * (u - 0.5));
    case Kind::uniform:
      return d.p1 + u * (d.p2 - d.p1);
    case Kind::exponential:
      return -std::log1p(-u) / d.p1;
  }
  throw std::logic_error("quantile: unknown kind");
}

double density_quantile(const Distribution1D& d, double u) {
  check_u(u);
  return density(d, quantile(d, u));
}

Matrix sample(const Distribution1D& d, std::uint64_t seed, std::size_t n) {
  require(n >= 1, "sample: n must be >= 1");
  Rng rng(seed);
  Matrix out(n, 1);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = quantile(d, rng.uniform01());
  return out;
}

double log_density(const IidSource& s, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(s.dim))
    throw std::invalid_argument("IidSource log_density: dimension mismatch");
  double acc = 0.0;
  for (double xi : x) acc += log_density(s.base, xi);
  return acc;
}

Matrix sample(const IidSource& s, std::uint64_t seed, std::size_t n) {
  require(n >= 1, "sample: n must be >= 1");
  Rng rng(seed);
  Matrix out(n, static_cast<std::size_t>(s.dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < static_cast<std::size_t>(s.dim); ++j)
      out(i, j) = quantile(s.base, rng.uniform01());
  return out;
}

double student_t_iid_log_density(double nu, std::span<const double> z) {
  if (!(nu > 0.0)) throw std::domain_error("student_t_iid_log_density: nu must be > 0");
  return student_t_iid_log_density_generic<double>(nu, z);
}

}  // namespace tailflow::dists
