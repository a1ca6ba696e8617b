#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "tailflow/autograd.hpp"
#include "tailflow/matrix.hpp"

namespace tailflow::dists {

enum class Kind : std::uint8_t { gaussian, student_t, cauchy, uniform, exponential };

// Closed-form univariate law. Parameter meaning by kind:
//   gaussian:    p1 = mean, p2 = sigma (> 0)
//   student_t:   p1 = nu (> 0), p2 = loc, p3 = scale (> 0)
//   cauchy:      p1 = loc, p2 = scale (> 0); equals student_t with nu = 1
//   uniform:     p1 = a, p2 = b (> a)
//   exponential: p1 = rate (> 0)
struct Distribution1D {
  Kind kind = Kind::gaussian;
  double p1 = 0.0;
  double p2 = 1.0;
  double p3 = 1.0;

  static Distribution1D gaussian(double mean, double sigma);
  static Distribution1D student_t(double nu, double loc = 0.0, double scale = 1.0);
  static Distribution1D cauchy(double loc = 0.0, double scale = 1.0);
  static Distribution1D uniform(double a, double b);
  static Distribution1D exponential(double rate);
};

// Out-of-support points of bounded-support laws return -infinity rather than
// throwing, so likelihood objectives stay total.
double log_density(const Distribution1D& d, double x);
double density(const Distribution1D& d, double x);
double cdf(const Distribution1D& d, double x);
// u must lie in (0,1); throws std::domain_error otherwise.
double quantile(const Distribution1D& d, double u);
// density(quantile(u)); strictly positive on the open support.
double density_quantile(const Distribution1D& d, double u);

// Inverse-CDF sampling; n x 1 matrix, deterministic per seed.
Matrix sample(const Distribution1D& d, std::uint64_t seed, std::size_t n);

// d independent copies of one base law.
struct IidSource {
  int dim = 1;
  Distribution1D base;
};

double log_density(const IidSource& s, std::span<const double> x);
Matrix sample(const IidSource& s, std::uint64_t seed, std::size_t n);

// log of the iid student-t source density t_nu(0, I) in d = z.size()
// dimensions. Valid for nu > 0 (throws below); as nu grows it approaches the
// iid standard Gaussian log density.
double student_t_iid_log_density(double nu, std::span<const double> z);

// Same formula generic over the scalar type so a training graph can carry a
// learnable nu. S is double or autograd::Var.
template <class S>
S student_t_iid_log_density_generic(S nu, std::span<const S> z) {
  using std::log;
  using tailflow::autograd::lgamma;
  using tailflow::autograd::log;
  const double d = static_cast<double>(z.size());
  constexpr double pi = 3.141592653589793238462643383279502884;
  S acc = d * lgamma((nu + 1.0) * 0.5) - d * lgamma(nu * 0.5) - (d * 0.5) * log(nu * pi);
  for (const S& zj : z) acc = acc - (nu + 1.0) * 0.5 * log(1.0 + zj * zj / nu);
  return acc;
}

// Internal numerics shared with sampling code elsewhere in the library.
namespace detail {
double gaussian_cdf_std(double x);
double gaussian_quantile_std(double u);
double ibeta_reg(double a, double b, double x);
double student_t_tail_std(double nu, double x);  // P(T > x), x >= 0
double student_t_quantile_std(double nu, double u);
}  // namespace detail

}  // namespace tailflow::dists
