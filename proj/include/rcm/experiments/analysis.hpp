#ifndef RCM_EXPERIMENTS_ANALYSIS_HPP
#define RCM_EXPERIMENTS_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rcm/distribution.hpp"
#include "rcm/errors.hpp"
#include "rcm/experiments/stats.hpp"

namespace rcm {

/// Variance and tail bounds for one statistic at one (d, kappa, gamma):
///   Var f_N <= constant N^exponent
///   P(|f_N - E f_N| >= t N^{-rho}) <= tail_prefactor exp(-t / tail_scale)
/// A NaN constant means only the rate is known; tail_verdict false means the
/// tail is printed but not judged. Outside its regime a bound is kept with
/// applicable = false and the reason in `guard`.
struct BoundSpec {
  std::string name;
  int d = 3;
  double kappa = 1.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double d0 = std::numeric_limits<double>::quiet_NaN();
  bool applicable = true;
  std::string guard;
  double constant = std::numeric_limits<double>::quiet_NaN();
  double exponent = 0.0;
  double slope_limit = 0.0;  // scaling-fit slope must not exceed this
  double rho = 0.0;
  double tail_prefactor = std::numeric_limits<double>::quiet_NaN();
  double tail_scale = std::numeric_limits<double>::quiet_NaN();
  bool tail_verdict = false;

  bool has_constant() const { return std::isfinite(constant); }
  bool has_tail() const { return std::isfinite(tail_prefactor) && std::isfinite(tail_scale); }
  double variance_bound(int n) const { return constant * std::pow(static_cast<double>(n), exponent); }
  double tail_bound(double t) const { return tail_prefactor * std::exp(-t / tail_scale); }
};

namespace bounds {

inline double c0(int d, double kappa) { return 32.0 * d * kappa * kappa * kappa; }

/// Effective conductance, elliptic conductances, d >= 3.
inline BoundSpec effective_conductance_elliptic(int d, double kappa) {
  BoundSpec b;
  b.name = "effective_conductance_elliptic";
  b.d = d;
  b.kappa = kappa;
  b.constant = kappa * c0(d, kappa);
  b.exponent = 2.0 - d;
  b.slope_limit = b.exponent + 0.5;
  b.rho = (d - 2.0) / 2.0;
  b.tail_prefactor = 4.0;
  b.tail_scale = std::sqrt(kappa * c0(d, kappa));
  b.tail_verdict = true;
  if (d < 3) {
    b.applicable = false;
    b.guard = "requires d >= 3";
  }
  if (!std::isfinite(kappa)) {
    b.applicable = false;
    b.guard = "requires uniformly elliptic conductances";
  }
  return b;
}

/// Effective conductance, 0 < a <= kappa only, d >= 5.
inline BoundSpec effective_conductance_bounded(int d, double kappa) {
  BoundSpec b;
  b.name = "effective_conductance_bounded";
  b.d = d;
  b.kappa = kappa;
  b.constant = 128.0 * d * kappa * kappa;
  b.exponent = 4.0 - d;
  b.slope_limit = b.exponent + 0.5;
  b.rho = (d - 4.0) / 2.0;
  b.tail_prefactor = 4.0;
  b.tail_scale = 8.0 * kappa * std::sqrt(2.0 * d);
  b.tail_verdict = true;
  if (d < 5) {
    b.applicable = false;
    b.guard = "requires d >= 5";
  }
  return b;
}

/// Effective conductance under P(1/a >= s) <= D0 s^{1 - 2/gamma}. The tail
/// involves universal constants with no known value, so only the
/// variance bound is judged.
inline BoundSpec effective_conductance_tail(int d, double kappa, double gamma, double d0) {
  BoundSpec b;
  b.name = "effective_conductance_tail";
  b.d = d;
  b.kappa = kappa;
  b.gamma = gamma;
  b.d0 = d0;
  b.constant = 16.0 * c0(d, kappa) * (d0 + 1.0);
  b.rho = 0.0;
  b.tail_verdict = false;
  if (d >= 4 || (d == 3 && gamma >= 0.5 && gamma < 1.0)) {
    b.exponent = 2.0 - d + gamma;
  } else if (d == 3 && gamma > 0 && gamma <= 0.5) {
    b.exponent = -0.5;
  } else {
    b.applicable = false;
    b.guard = "requires d >= 4, or d = 3 with 0 < gamma < 1";
  }
  b.slope_limit = b.exponent + 0.5;
  return b;
}

inline BoundSpec effective_conductance_tail(int d, const DistributionSpec& law) {
  return effective_conductance_tail(d, law.upper_bound(), law.tail_exponent_gamma(), law.tail_constant());
}

/// N^2 lambda_N, elliptic, d >= 3: rate N^{2-d} with an unknown constant.
inline BoundSpec spectral_rate(int d, double kappa) {
  BoundSpec b;
  b.name = "spectral_rate";
  b.d = d;
  b.kappa = kappa;
  b.exponent = 2.0 - d;
  b.slope_limit = b.exponent + 0.5;
  b.rho = (d - 2.0) / 2.0;
  if (d < 3) {
    b.applicable = false;
    b.guard = "requires d >= 3";
  }
  return b;
}

/// Periodized diffusion matrix entries: some negative rate, exponent unknown.
inline BoundSpec diffusion_rate(int d, double kappa) {
  BoundSpec b;
  b.name = "diffusion_rate";
  b.d = d;
  b.kappa = kappa;
  b.exponent = 0.0;
  b.slope_limit = 0.0;
  if (!std::isfinite(kappa)) {
    b.applicable = false;
    b.guard = "requires uniformly elliptic conductances";
  }
  return b;
}

}  // namespace bounds

struct TailRow {
  double t = 0.0;
  std::size_t count = 0;
  double empirical = 0.0;
  double bound = std::numeric_limits<double>::quiet_NaN();
  double allowance = 0.0;  // 3 binomial sigma
  bool judged = false;
  bool pass = true;
};

/// Frequency of |f - mean| >= t N^{-rho}, centred at the sample mean.
inline std::vector<TailRow> tail_profile(std::span<const double> samples, int n, double rho,
                                         std::span<const double> thresholds, const BoundSpec* bound = nullptr) {
  if (samples.empty()) throw UsageError("tail_profile: empty sample set");
  const double mean = SampleStats::of(samples).mean();
  const double scale = std::pow(static_cast<double>(n), -rho);
  const double m = static_cast<double>(samples.size());
  std::vector<TailRow> rows;
  for (double t : thresholds) {
    TailRow r;
    r.t = t;
    for (double x : samples) r.count += std::abs(x - mean) >= t * scale;
    r.empirical = r.count / m;
    if (bound && bound->has_tail()) {
      r.bound = bound->tail_bound(t);
      const double p = std::clamp(std::max(r.bound, r.empirical), 0.0, 1.0);
      r.allowance = 3.0 * std::sqrt(p * (1.0 - p) / m);
      r.judged = bound->tail_verdict && bound->applicable;
      r.pass = !r.judged || r.empirical <= r.bound + r.allowance;
    }
    rows.push_back(r);
  }
  return rows;
}

struct ScalingPoint {
  int n = 0;
  double variance = 0.0;
  double stderr_variance = 0.0;
};

struct ScalingFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  bool weighted = false;
  std::vector<std::string> warnings;
};

/// Least squares of log Var on log N. Points are weighted by the inverse
/// squared error of log Var, (Var / se)^2, when every point has an error.
inline ScalingFit scaling_fit(std::span<const ScalingPoint> points) {
  if (points.size() < 3) throw UsageError("scaling_fit needs at least 3 values of N");
  ScalingFit fit;
  std::vector<double> x, y, w;
  for (const auto& p : points) {
    if (!(p.variance > 0) || !std::isfinite(p.variance)) {
      fit.warnings.push_back("N=" + std::to_string(p.n) + ": nonpositive variance dropped");
      continue;
    }
    x.push_back(std::log(static_cast<double>(p.n)));
    y.push_back(std::log(p.variance));
    w.push_back(p.stderr_variance > 0 && std::isfinite(p.stderr_variance)
                    ? (p.variance / p.stderr_variance) * (p.variance / p.stderr_variance)
                    : 0.0);
  }
  fit.used = x.size();
  if (fit.used < 2) {
    fit.warnings.push_back("fewer than two usable points; no fit");
    return fit;
  }
  fit.weighted = std::all_of(w.begin(), w.end(), [](double v) { return v > 0; });
  if (!fit.weighted) std::fill(w.begin(), w.end(), 1.0);
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += w[k] * (x[k] - mx) * (x[k] - mx);
    sxy += w[k] * (x[k] - mx) * (y[k] - my);
    syy += w[k] * (y[k] - my) * (y[k] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

struct BoundVerdict {
  int n = 0;
  double variance = 0.0;
  double allowance = 0.0;  // 3 standard errors
  double bound = std::numeric_limits<double>::quiet_NaN();
  double scaled = 0.0;     // Var N^{-exponent}
  bool judged = false;
  bool pass = true;
};

/// Var f_N <= constant N^exponent + 3 se at one N. Parameters must match the
/// ones the bound was built for.
inline BoundVerdict bound_check(const SampleStats& stats, int n, const BoundSpec& bound, int d, double kappa,
                                double gamma = std::numeric_limits<double>::quiet_NaN()) {
  const auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  if (d != bound.d || !same(kappa, bound.kappa) || !same(gamma, bound.gamma))
    throw UsageError("bound_check: parameters do not match bound '" + bound.name + "'");
  BoundVerdict v;
  v.n = n;
  v.variance = stats.variance();
  v.allowance = stats.n() >= 4 ? 3.0 * stats.variance_stderr() : std::numeric_limits<double>::infinity();
  v.scaled = v.variance * std::pow(static_cast<double>(n), -bound.exponent);
  if (bound.has_constant() && bound.applicable) {
    v.bound = bound.variance_bound(n);
    v.judged = true;
    v.pass = v.variance <= v.bound + v.allowance;
  }
  return v;
}

}  // namespace rcm

#endif  // RCM_EXPERIMENTS_ANALYSIS_HPP
