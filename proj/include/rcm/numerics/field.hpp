#ifndef RCM_NUMERICS_FIELD_HPP
#define RCM_NUMERICS_FIELD_HPP

#include <array>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

/// Real values indexed by the sites of a lattice.
///
/// On a torus a field may be quasi-periodic: crossing the +e_j seam adds
/// wrap_jump[j]. The position g(x) = x is stored this way, which keeps its
/// increments (and those of x + chi(x)) correct across the seam.
struct Field {
  LatticeSpec lattice;
  std::vector<double> values;
  std::array<double, kMaxDim> wrap_jump{};

  static Field zeros(const LatticeSpec& lat) { return {lat, std::vector<double>(lat.site_count(), 0.0), {}}; }

  static Field constant(const LatticeSpec& lat, double c) {
    return {lat, std::vector<double>(lat.site_count(), c), {}};
  }

  /// g_axis(x) = x[axis].
  static Field coordinate(const LatticeSpec& lat, int axis) {
    Field f = zeros(lat);
    for (std::size_t s = 0; s < f.values.size(); ++s) f.values[s] = lat.coords(s)[axis];
    if (lat.closure == Closure::torus) f.wrap_jump[axis] = lat.n;
    return f;
  }

  bool periodic() const noexcept {
    for (double j : wrap_jump)
      if (j != 0.0) return false;
    return true;
  }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) noexcept { return values[i]; }
  double operator[](std::size_t i) const noexcept { return values[i]; }
};

using VectorField = std::vector<Field>;

inline void require_same_shape(const Field& a, const Field& b) {
  if (!(a.lattice == b.lattice) || a.values.size() != b.values.size())
    throw UsageError("fields live on different lattices");
}

inline void require_shape(const LatticeSpec& lat, const Field& f) {
  if (!(f.lattice == lat) || f.values.size() != lat.site_count())
    throw UsageError("field does not match the environment's lattice");
}

}  // namespace rcm

#endif  // RCM_NUMERICS_FIELD_HPP
