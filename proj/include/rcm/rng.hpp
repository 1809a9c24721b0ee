#ifndef RCM_RNG_HPP
#define RCM_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <span>

namespace rcm::rng {

// SplitMix64 finaliser; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ (mix64(v) + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)));
}

constexpr std::uint64_t zigzag(std::int64_t v) noexcept {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

/// Derive a child seed from a master seed and a tuple of identifiers.
constexpr std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = mix64(master);
  for (auto id : ids) h = combine(h, id);
  return h;
}

/// Counter-based stream: draw k is a pure function of (key, k), so any
/// number of streams can be evaluated in any order.
class CounterStream {
 public:
  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(++counter_ * 0xd1b54a32d192ed03ULL)); }

  /// Uniform on (0, 1] with 53 random bits.
  constexpr double uniform_open_closed() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rcm::rng

#endif  // RCM_RNG_HPP
