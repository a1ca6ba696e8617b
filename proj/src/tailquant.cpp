#include "tailflow/tailquant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tailflow::tailquant {

namespace {

struct LeastSquares {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

LeastSquares fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("estimate_gamma: degenerate fit grid");
  LeastSquares out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (out.intercept + out.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  out.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return out;
}

// Log of quantile values, shifting by the window minimum when nonpositive
// values would make the log undefined.
std::vector<double> safe_log(std::span<const double> q, bool& shifted) {
  double lo = q[0], hi = q[0];
  for (double v : q) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double shift = 0.0;
  if (lo <= 0.0) {
    shifted = true;
    shift = -lo + (hi > lo ? 1e-9 * (hi - lo) : 1.0);
  }
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = std::log(q[i] + shift);
  return out;
}

}  // namespace

double empirical_quantile_sorted(std::span<const double> sorted, double u) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("empirical_quantile: u must lie in (0,1)");
  const double un = u * static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(un));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double empirical_quantile(std::span<const double> samples, double u) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return empirical_quantile_sorted(sorted, u);
}

TailProfile estimate_gamma(std::span<const double> samples, double u_lo, double u_hi,
                           GammaMethod method, int grid_points) {
  if (samples.size() < 100) throw std::invalid_argument("estimate_gamma: need at least 100 samples");
  if (!(0.5 <= u_lo && u_lo < u_hi && u_hi < 1.0))
    throw std::invalid_argument("estimate_gamma: need 0.5 <= u_lo < u_hi < 1");
  if (grid_points < 2) throw std::invalid_argument("estimate_gamma: need at least 2 grid points");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  TailProfile profile;
  profile.u_lo = u_lo;
  profile.u_hi = u_hi;

  if (method == GammaMethod::hill) {
    const std::size_t n = sorted.size();
    const std::size_t k = static_cast<std::size_t>((1.0 - u_lo) * static_cast<double>(n));
    if (k < 5) throw std::invalid_argument("estimate_gamma: too few tail points for Hill");
    std::vector<double> top(sorted.end() - static_cast<std::ptrdiff_t>(k + 1), sorted.end());
    bool shifted = false;
    const std::vector<double> logs = safe_log(top, shifted);  // ascending, k+1 values
    double acc = 0.0;
    for (std::size_t i = 1; i <= k; ++i) acc += logs[i] - logs[0];
    profile.gamma = acc / static_cast<double>(k);
    profile.shifted_fit = shifted;
    profile.n_points = k;
    // Pareto quantile plot used only as an r^2 diagnostic.
    std::vector<double> t(k), y(k);
    for (std::size_t i = 0; i < k; ++i) {
      t[i] = std::log(static_cast<double>(k + 1) / static_cast<double>(k - i));
      y[i] = logs[i + 1];
    }
    profile.r_squared = fit_line(t, y).r_squared;
  } else {
    std::vector<double> t(static_cast<std::size_t>(grid_points));
    std::vector<double> q(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
      const double u = u_lo + (u_hi - u_lo) * static_cast<double>(i) /
                                  static_cast<double>(grid_points - 1);
      t[static_cast<std::size_t>(i)] = -std::log1p(-u);
      q[static_cast<std::size_t>(i)] = empirical_quantile_sorted(sorted, u);
    }
    bool shifted = false;
    const std::vector<double> y = safe_log(q, shifted);
    const LeastSquares fit = fit_line(t, y);
    profile.gamma = fit.slope;
    profile.r_squared = fit.r_squared;
    profile.shifted_fit = shifted;
    profile.n_points = static_cast<std::size_t>(grid_points);
    profile.alpha = profile.gamma + 1.0;
    if (profile.alpha >= 0.9 && profile.alpha <= 1.1) {
      std::vector<double> logt(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) logt[i] = std::log(t[i]);
      profile.beta = fit_line(logt, y).slope;
    }
  }
  profile.alpha = profile.gamma + 1.0;
  return profile;
}

std::vector<double> norm_reduce(const Matrix& points) {
  std::vector<double> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double acc = 0.0;
    for (double v : points.row(i)) acc += v * v;
    out[i] = std::sqrt(acc);
  }
  return out;
}

double moment_order_bound(const TailProfile& profile) {
  if (profile.gamma <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / profile.gamma;
}

bool moment_exists(double gamma, double omega) {
  if (gamma <= 0.0) return true;
  return omega < 1.0 / gamma;
}

TailClass classify_tail(const TailProfile& profile, double tau) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const double alpha = profile.alpha;
  if (alpha > 1.0 + tau) return {TailClass::Kind::heavy, profile.gamma};
  if (alpha >= 1.0 - tau) return {TailClass::Kind::medium, profile.beta.value_or(nan)};
  if (alpha > tau) return {TailClass::Kind::bounded_above, nan};
  return {TailClass::Kind::light, nan};
}

double rearrangement_evaluate(const Rearrangement1D& r, double z, bool* clamped) {
  double u = dists::cdf(r.source, z);
  const double lo = 1e-15, hi = 1.0 - 1e-15;
  if (u < lo || u > hi) {
    if (clamped) *clamped = true;
    u = std::clamp(u, lo, hi);
  }
  return dists::quantile(r.target, u);
}

double rearrangement_slope(const Rearrangement1D& r, double z, bool* clamped) {
  const double tz = rearrangement_evaluate(r, z, clamped);
  return dists::density(r.source, z) / dists::density(r.target, tz);
}

}  // namespace tailflow::tailquant
