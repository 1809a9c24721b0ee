#ifndef RCM_DISTRIBUTION_HPP
#define RCM_DISTRIBUTION_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rcm/errors.hpp"

namespace rcm {

enum class DistKind { constant, uniform_elliptic, two_point, power_low_tail, explicit_values };

/// Law of one i.i.d. conductance (or one site potential).
///
/// constant(c)                 point mass at c
/// uniform_elliptic(kappa)     uniform on [1/kappa, kappa]
/// two_point(p, lo, hi)        hi with probability p, lo otherwise
/// power_low_tail(gamma, kappa) kappa * U^(gamma/(2-gamma)), U uniform on (0,1];
///                             P(1/a >= s) = (kappa s)^(-(2-gamma)/gamma) for s >= 1/kappa
/// explicit_values             weights supplied by the caller, nothing to sample
struct DistributionSpec {
  DistKind kind = DistKind::constant;
  double p0 = 1.0;
  double p1 = 0.0;
  double p2 = 0.0;

  static DistributionSpec constant(double c) { return {DistKind::constant, c, 0, 0}; }
  static DistributionSpec uniform_elliptic(double kappa) { return {DistKind::uniform_elliptic, kappa, 0, 0}; }
  static DistributionSpec two_point(double p, double lo, double hi) { return {DistKind::two_point, p, lo, hi}; }
  static DistributionSpec power_low_tail(double gamma, double kappa) {
    return {DistKind::power_low_tail, gamma, kappa, 0};
  }
  static DistributionSpec explicit_values() { return {DistKind::explicit_values, 0, 0, 0}; }

  bool operator==(const DistributionSpec&) const = default;

  /// Conductance laws need strictly positive support.
  void validate_conductance() const {
    validate_common();
    switch (kind) {
      case DistKind::constant:
        if (!(p0 > 0)) throw ParameterError("constant(c) conductance requires c > 0");
        break;
      case DistKind::two_point:
        if (!(p1 > 0)) throw ParameterError("two_point(p, lo, hi) conductance requires lo > 0");
        break;
      default:
        break;
    }
  }

  /// Potential laws need support in [0, inf).
  void validate_potential() const {
    validate_common();
    switch (kind) {
      case DistKind::constant:
        if (!(p0 >= 0)) throw ParameterError("constant(v) potential requires v >= 0");
        break;
      case DistKind::two_point:
        if (!(p1 >= 0)) throw ParameterError("two_point(p, lo, hi) potential requires lo >= 0");
        break;
      case DistKind::explicit_values:
        throw ParameterError("explicit_values is not a samplable potential law");
      default:
        break;
    }
  }

  /// True when the law is a point mass (no randomness).
  bool degenerate() const {
    switch (kind) {
      case DistKind::constant: return true;
      case DistKind::uniform_elliptic: return p0 == 1.0;
      case DistKind::two_point: return p0 == 0.0 || p0 == 1.0 || p1 == p2;
      default: return false;
    }
  }

  /// Inverse-transform sample from one uniform u in (0, 1].
  double sample(double u) const {
    switch (kind) {
      case DistKind::constant: return p0;
      case DistKind::uniform_elliptic: {
        const double lo = 1.0 / p0;
        return lo + (p0 - lo) * (1.0 - u);
      }
      case DistKind::two_point: return u <= p0 ? p2 : p1;
      case DistKind::power_low_tail: return p1 * std::pow(u, p0 / (2.0 - p0));
      case DistKind::explicit_values: break;
    }
    throw UsageError("explicit_values distribution cannot be sampled");
  }

  /// Smallest kappa >= 1 with support inside [1/kappa, kappa]; infinity for
  /// laws that are not uniformly elliptic.
  double ellipticity() const {
    switch (kind) {
      case DistKind::constant: return std::max(p0, 1.0 / p0);
      case DistKind::uniform_elliptic: return p0;
      case DistKind::two_point: return std::max({1.0, p2, 1.0 / p1});
      default: return std::numeric_limits<double>::infinity();
    }
  }

  /// Upper end of the support.
  double upper_bound() const {
    switch (kind) {
      case DistKind::constant: return p0;
      case DistKind::uniform_elliptic: return p0;
      case DistKind::two_point: return std::max(p1, p2);
      case DistKind::power_low_tail: return p1;
      default: return std::numeric_limits<double>::infinity();
    }
  }

  /// D0 with P(1/a >= s) <= D0 s^(1 - 2/gamma), s >= 1. Only for power_low_tail.
  double tail_constant() const {
    if (kind != DistKind::power_low_tail) throw UsageError("tail_constant requires power_low_tail");
    return std::pow(p1, -(2.0 - p0) / p0);
  }

  double tail_exponent_gamma() const {
    if (kind != DistKind::power_low_tail) throw UsageError("tail exponent requires power_low_tail");
    return p0;
  }

  /// Analytic CDF of the law at t.
  double cdf(double t) const {
    switch (kind) {
      case DistKind::constant: return t >= p0 ? 1.0 : 0.0;
      case DistKind::uniform_elliptic: {
        const double lo = 1.0 / p0;
        if (t < lo) return 0.0;
        if (t >= p0) return 1.0;
        return (t - lo) / (p0 - lo);
      }
      case DistKind::two_point: {
        double c = 0.0;
        if (t >= p1) c += 1.0 - p0;
        if (t >= p2) c += p0;
        return std::min(c, 1.0);
      }
      case DistKind::power_low_tail:
        if (t <= 0) return 0.0;
        if (t >= p1) return 1.0;
        return std::pow(t / p1, (2.0 - p0) / p0);
      default: break;
    }
    throw UsageError("cdf undefined for explicit_values");
  }

  /// Var log(1 + V) for V distributed according to this law.
  double log1p_variance() const {
    switch (kind) {
      case DistKind::constant: return 0.0;
      case DistKind::two_point: {
        const double gap = std::log1p(p2) - std::log1p(p1);
        return p0 * (1.0 - p0) * gap * gap;
      }
      case DistKind::uniform_elliptic: {
        if (p0 == 1.0) return 0.0;
        const double lo = 1.0 + 1.0 / p0, hi = 1.0 + p0;
        // antiderivatives of log w and log^2 w
        auto f1 = [](double w) { return w * std::log(w) - w; };
        auto f2 = [](double w) {
          const double l = std::log(w);
          return w * (l * l - 2.0 * l + 2.0);
        };
        const double width = hi - lo;
        const double m1 = (f1(hi) - f1(lo)) / width;
        const double m2 = (f2(hi) - f2(lo)) / width;
        return std::max(0.0, m2 - m1 * m1);
      }
      case DistKind::power_low_tail: {
        using boost::math::quadrature::gauss_kronrod;
        const double r = p0 / (2.0 - p0), kappa = p1;
        auto theta = [&](double u) { return std::log1p(kappa * std::pow(u, r)); };
        const double m1 = gauss_kronrod<double, 31>::integrate(theta, 0.0, 1.0, 15, 1e-14);
        const double m2 =
            gauss_kronrod<double, 31>::integrate([&](double u) { return theta(u) * theta(u); }, 0.0, 1.0, 15, 1e-14);
        return std::max(0.0, m2 - m1 * m1);
      }
      default: break;
    }
    throw UsageError("log1p_variance undefined for explicit_values");
  }

 private:
  void validate_common() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(p0) || !finite(p1) || !finite(p2)) throw ParameterError("distribution parameters must be finite");
    switch (kind) {
      case DistKind::uniform_elliptic:
        if (!(p0 >= 1.0)) throw ParameterError("uniform_elliptic(kappa) requires kappa >= 1");
        break;
      case DistKind::two_point:
        if (!(p0 >= 0.0 && p0 <= 1.0)) throw ParameterError("two_point(p, lo, hi) requires 0 <= p <= 1");
        if (!(p1 <= p2)) throw ParameterError("two_point(p, lo, hi) requires lo <= hi");
        break;
      case DistKind::power_low_tail:
        if (!(p0 > 0.0 && p0 < 2.0)) throw ParameterError("power_low_tail(gamma, kappa) requires 0<gamma<2");
        if (!(p1 >= 1.0)) throw ParameterError("power_low_tail(gamma, kappa) requires kappa >= 1");
        break;
      default:
        break;
    }
  }
};

inline std::string kind_name(DistKind k) {
  switch (k) {
    case DistKind::constant: return "constant";
    case DistKind::uniform_elliptic: return "uniform-elliptic";
    case DistKind::two_point: return "two-point";
    case DistKind::power_low_tail: return "power-low-tail";
    case DistKind::explicit_values: return "explicit";
  }
  return "?";
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw ParameterError("not a number: '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(parse_double(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parameter list in the order accepted by parse_distribution.
inline std::vector<double> distribution_params(const DistributionSpec& d) {
  switch (d.kind) {
    case DistKind::constant:
    case DistKind::uniform_elliptic: return {d.p0};
    case DistKind::two_point: return {d.p0, d.p1, d.p2};
    case DistKind::power_low_tail: return {d.p0, d.p1};
    case DistKind::explicit_values: return {};
  }
  return {};
}

/// "kind:params", e.g. "uniform-elliptic:2" or "two-point:0.5,0.5,2".
inline std::string to_string(const DistributionSpec& d) {
  std::string s = kind_name(d.kind);
  const auto params = distribution_params(d);
  for (std::size_t i = 0; i < params.size(); ++i) s += (i == 0 ? ":" : ",") + detail::format_double(params[i]);
  return s;
}

inline DistributionSpec make_distribution(const std::string& kind, const std::vector<double>& params) {
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      throw ParameterError(kind + " expects " + std::to_string(n) + " parameter(s), got " +
                           std::to_string(params.size()));
  };
  std::string k = kind;
  for (auto& ch : k)
    if (ch == '_') ch = '-';
  if (k == "constant") {
    need(1);
    return DistributionSpec::constant(params[0]);
  }
  if (k == "uniform-elliptic") {
    need(1);
    return DistributionSpec::uniform_elliptic(params[0]);
  }
  if (k == "two-point") {
    need(3);
    return DistributionSpec::two_point(params[0], params[1], params[2]);
  }
  if (k == "power-low-tail") {
    need(2);
    return DistributionSpec::power_low_tail(params[0], params[1]);
  }
  if (k == "explicit") {
    need(0);
    return DistributionSpec::explicit_values();
  }
  throw ParameterError("unknown distribution kind '" + kind + "'");
}

inline DistributionSpec parse_distribution(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return make_distribution(text, {});
  return make_distribution(text.substr(0, colon), detail::parse_list(text.substr(colon + 1)));
}

}  // namespace rcm

#endif  // RCM_DISTRIBUTION_HPP
