#ifndef RCM_EXPERIMENTS_STATS_HPP
#define RCM_EXPERIMENTS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rcm/errors.hpp"

namespace rcm {

/// One-pass moments up to order four (Welford / Pebay updates) with an exact
/// pairwise merge, plus counts of |x - center| >= t on a fixed grid.
/// Results depend on the merge order, so callers merge in index order.
class SampleStats {
 public:
  SampleStats() = default;
  SampleStats(std::vector<double> thresholds, double center)
      : thresholds_(std::move(thresholds)), tail_counts_(thresholds_.size(), 0), center_(center) {}

  void push(double x) {
    SampleStats one(thresholds_, center_);
    one.n_ = 1;
    one.mean_ = x;
    one.min_ = one.max_ = x;
    for (std::size_t k = 0; k < thresholds_.size(); ++k) one.tail_counts_[k] = std::abs(x - center_) >= thresholds_[k];
    merge(one);
  }

  void merge(const SampleStats& b) {
    if (thresholds_ != b.thresholds_ || center_ != b.center_) throw UsageError("SampleStats: tail grids differ");
    if (b.n_ == 0) return;
    if (n_ == 0) {
      *this = b;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(b.n_), n = na + nb;
    const double delta = b.mean_ - mean_, d2 = delta * delta;
    const double m2 = m2_ + b.m2_ + d2 * na * nb / n;
    const double m3 = m3_ + b.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * b.m2_ - nb * m2_) / n;
    const double m4 = m4_ + b.m4_ + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                      6.0 * d2 * (na * na * b.m2_ + nb * nb * m2_) / (n * n) + 4.0 * delta * (na * b.m3_ - nb * m3_) / n;
    mean_ += delta * nb / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += b.n_;
    min_ = std::min(min_, b.min_);
    max_ = std::max(max_, b.max_);
    for (std::size_t k = 0; k < tail_counts_.size(); ++k) tail_counts_[k] += b.tail_counts_[k];
  }

  std::uint64_t n() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double m2() const noexcept { return m2_; }
  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }
  double variance() const noexcept { return n_ > 1 ? std::max(0.0, m2_) / static_cast<double>(n_ - 1) : 0.0; }
  double mean_stderr() const noexcept { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

  /// Standard error of variance() from the fourth central moment.
  double variance_stderr() const noexcept {
    if (n_ < 4) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(n_);
    const double mu2 = m2_ / n, mu4 = m4_ / n;
    return std::sqrt(std::max(0.0, mu4 - (n - 3.0) / (n - 1.0) * mu2 * mu2) / n);
  }

  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const std::vector<std::uint64_t>& tail_counts() const noexcept { return tail_counts_; }

  static SampleStats of(std::span<const double> xs) {
    SampleStats s;
    for (double x : xs) s.push(x);
    return s;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
  std::vector<double> thresholds_;
  std::vector<std::uint64_t> tail_counts_;
  double center_ = 0.0;
};

}  // namespace rcm

#endif  // RCM_EXPERIMENTS_STATS_HPP
