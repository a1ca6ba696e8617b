#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tailflow/dists.hpp"
#include "tailflow/matrix.hpp"

namespace tailflow::tailquant {

// Fitted right-tail coefficients. gamma is the exponent in Q(u) ~ (1-u)^-gamma
// and alpha = gamma + 1 the density-quantile exponent fQ(u) ~ (1-u)^alpha.
// beta refines the alpha = 1 class (Q(u) ~ (log 1/(1-u))^beta) and is fitted
// only when alpha lands in [0.9, 1.1]. shifted_fit flags the log-domain
// fallback applied when nonpositive quantiles entered the window.
struct TailProfile {
  double gamma = 0.0;
  double alpha = 1.0;
  std::optional<double> beta;
  double u_lo = 0.0;
  double u_hi = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  bool shifted_fit = false;
};

enum class GammaMethod { quantile_regression, hill };

// ceil(u*n)-th order statistic, no interpolation. Throws on empty input or
// u outside (0,1).
double empirical_quantile(std::span<const double> samples, double u);
double empirical_quantile_sorted(std::span<const double> sorted, double u);

// Fit gamma over an evenly spaced u-grid in [u_lo, u_hi] (least squares of
// ln Q(u) on -ln(1-u), default 50 points), or with the Hill estimator on the
// top floor((1-u_lo)*n) order statistics. Requires n >= 100 and
// 0.5 <= u_lo < u_hi < 1.
TailProfile estimate_gamma(std::span<const double> samples, double u_lo = 0.95,
                           double u_hi = 0.999,
                           GammaMethod method = GammaMethod::quantile_regression,
                           int grid_points = 50);

// Row-wise Euclidean norms.
std::vector<double> norm_reduce(const Matrix& points);

// Supremum of finite moment orders, 1/gamma; +infinity when gamma <= 0.
double moment_order_bound(const TailProfile& profile);
// Moments of order omega exist iff omega < 1/gamma (all orders for gamma <= 0).
bool moment_exists(double gamma, double omega);

struct TailClass {
  enum class Kind { bounded_above, light, medium, heavy };
  Kind kind;
  // beta for medium, gamma for heavy, NaN otherwise.
  double param;
};

// Threshold rule on alpha with tolerance tau: alpha > 1+tau is heavy,
// |alpha-1| <= tau is medium (reporting the profile's beta), below that
// bounded-above (alpha in (tau, 1-tau], the bounded-support band) or light
// (alpha <= tau, no density-quantile decay). Total on fitted profiles.
TailClass classify_tail(const TailProfile& profile, double tau = 0.1);

// The unique increasing 1-D transport T = Q_target o F_source.
struct Rearrangement1D {
  dists::Distribution1D source;
  dists::Distribution1D target;
};

// T(z); u = F_source(z) is clamped to [1e-15, 1-1e-15] near the support
// edges (clamped, when given, reports that).
double rearrangement_evaluate(const Rearrangement1D& r, double z, bool* clamped = nullptr);
// T'(z) = p(z) / q(T(z)); strictly positive on the open source support.
double rearrangement_slope(const Rearrangement1D& r, double z, bool* clamped = nullptr);

}  // namespace tailflow::tailquant
