#ifndef RCM_NUMERICS_SUMMATION_HPP
#define RCM_NUMERICS_SUMMATION_HPP

#include <cstddef>
#include <span>

namespace rcm::numerics {

/// Pairwise (tree) summation with a fixed split point, so the result depends
/// only on the order of the terms.
inline double pairwise_sum(std::span<const double> terms) noexcept {
  constexpr std::size_t kBlock = 8;
  if (terms.size() <= kBlock) {
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace rcm::numerics

#endif  // RCM_NUMERICS_SUMMATION_HPP
