#ifndef RCM_LATTICE_HPP
#define RCM_LATTICE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "rcm/errors.hpp"
#include "rcm/rng.hpp"

namespace rcm {

inline constexpr int kMaxDim = 5;

using Coord = std::array<int, kMaxDim>;

/// torus: Q_N with periodic identification, coordinates 0..N-1.
/// closed_box: [0, N+1]^d, interior 1..N, the rest is the boundary.
enum class Closure { torus, closed_box };

inline std::string to_string(Closure c) { return c == Closure::torus ? "torus" : "closed_box"; }

inline Closure closure_from_string(const std::string& s) {
  if (s == "torus") return Closure::torus;
  if (s == "closed_box" || s == "box") return Closure::closed_box;
  throw ParameterError("unknown closure '" + s + "' (expected torus or closed_box)");
}

struct LatticeSpec {
  int d = 1;
  int n = 1;
  Closure closure = Closure::torus;

  void validate() const {
    if (d < 1 || d > kMaxDim)
      throw ParameterError("dimension d must satisfy 1 <= d <= " + std::to_string(kMaxDim));
    if (n < 1) throw ParameterError("side length N must be >= 1");
  }

  /// Number of coordinate values per axis.
  int side() const noexcept { return closure == Closure::torus ? n : n + 2; }

  std::size_t site_count() const noexcept {
    std::size_t c = 1;
    for (int i = 0; i < d; ++i) c *= static_cast<std::size_t>(side());
    return c;
  }

  /// Lexicographic index, first coordinate most significant.
  std::size_t index(const Coord& x) const noexcept {
    std::size_t idx = 0;
    const auto s = static_cast<std::size_t>(side());
    for (int i = 0; i < d; ++i) idx = idx * s + static_cast<std::size_t>(x[i]);
    return idx;
  }

  Coord coords(std::size_t idx) const noexcept {
    Coord x{};
    const auto s = static_cast<std::size_t>(side());
    for (int i = d - 1; i >= 0; --i) {
      x[i] = static_cast<int>(idx % s);
      idx /= s;
    }
    return x;
  }

  std::size_t stride(int axis) const noexcept {
    std::size_t st = 1;
    for (int i = axis + 1; i < d; ++i) st *= static_cast<std::size_t>(side());
    return st;
  }

  bool contains(const Coord& x) const noexcept {
    for (int i = 0; i < d; ++i)
      if (x[i] < 0 || x[i] >= side()) return false;
    return true;
  }

  /// Q_N membership. Every torus site is interior.
  bool is_interior(const Coord& x) const noexcept {
    if (closure == Closure::torus) return contains(x);
    for (int i = 0; i < d; ++i)
      if (x[i] < 1 || x[i] > n) return false;
    return true;
  }

  bool operator==(const LatticeSpec&) const = default;
};

/// Reduce coordinates mod N into 0..N-1.
inline Coord wrap(const LatticeSpec& lat, Coord x) noexcept {
  for (int i = 0; i < lat.d; ++i) {
    x[i] %= lat.n;
    if (x[i] < 0) x[i] += lat.n;
  }
  return x;
}

/// Identity of an undirected nearest-neighbour edge {x, x + e_dir}.
struct Edge {
  std::size_t site = 0;
  int dir = 0;
  bool operator==(const Edge&) const = default;
};

inline std::uint64_t canonical_site_key(const Coord& x, int d) noexcept {
  std::uint64_t h = rng::mix64(static_cast<std::uint64_t>(d));
  for (int i = 0; i < d; ++i) h = rng::combine(h, rng::zigzag(x[i]));
  return h;
}

/// Position-keyed edge id: the same physical edge gets the same id for
/// every N and closure, so nested cubes share their common conductances.
inline std::uint64_t canonical_edge_key(const Coord& x, int d, int dir) noexcept {
  return rng::combine(canonical_site_key(x, d), static_cast<std::uint64_t>(dir) + 1);
}

}  // namespace rcm

#endif  // RCM_LATTICE_HPP
