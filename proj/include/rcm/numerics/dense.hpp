#ifndef RCM_NUMERICS_DENSE_HPP
#define RCM_NUMERICS_DENSE_HPP

#include <vector>

#include <Eigen/Dense>

#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/numerics/operator.hpp"

namespace rcm {

inline constexpr std::size_t kDenseOracleCap = 4096;

/// Explicit walk operator on the unknowns: Hu = h u + offset, where offset
/// carries the fixed face values of the mixed problem. For tests.
struct DenseSystem {
  Eigen::MatrixXd h;
  Eigen::VectorXd offset;
  Eigen::VectorXd weight;           // a(x)
  std::vector<std::size_t> sites;   // lattice index of each unknown

  /// diag(a)^{1/2} h diag(a)^{-1/2}, symmetric by reversibility.
  Eigen::MatrixXd symmetrized() const {
    const Eigen::VectorXd s = weight.array().sqrt();
    return s.asDiagonal() * h * s.cwiseInverse().asDiagonal();
  }
};

/// Built from coordinates and the stored weights alone, independent of the
/// matrix-free operator's link tables.
inline DenseSystem dense_oracle(const Environment& env, BoundaryCondition bc) {
  const LatticeSpec& lat = env.lattice;
  const bool torus = lat.closure == Closure::torus;
  if ((bc == BoundaryCondition::periodic) != torus) throw UsageError("boundary condition does not match closure");

  DenseSystem sys;
  std::vector<long> unknown(lat.site_count(), -1);
  for (std::size_t s = 0; s < lat.site_count(); ++s)
    if (lat.is_interior(lat.coords(s))) {
      unknown[s] = static_cast<long>(sys.sites.size());
      sys.sites.push_back(s);
    }
  const auto m = static_cast<Eigen::Index>(sys.sites.size());
  if (sys.sites.size() > kDenseOracleCap) throw UsageError("dense_oracle: more than 4096 unknowns");
  sys.h = Eigen::MatrixXd::Identity(m, m);
  sys.offset = Eigen::VectorXd::Zero(m);
  sys.weight = Eigen::VectorXd::Zero(m);

  for (Eigen::Index row = 0; row < m; ++row) {
    const Coord x = lat.coords(sys.sites[static_cast<std::size_t>(row)]);
    struct Nb {
      Coord y;
      double w;
    };
    std::vector<Nb> nbs;
    for (int i = 0; i < lat.d; ++i) {
      Coord up = x, down = x;
      up[i] += 1;
      down[i] -= 1;
      if (torus) {
        up[i] %= lat.n;
        down[i] = (down[i] + lat.n) % lat.n;
      }
      nbs.push_back({up, env.weights[lat.index(x) * lat.d + i]});
      nbs.push_back({down, env.weights[lat.index(down) * lat.d + i]});
    }
    double a = 0.0;
    for (const auto& nb : nbs) a += nb.w;
    sys.weight(row) = a;
    for (const auto& nb : nbs) {
      const long col = unknown[lat.index(nb.y)];
      if (col >= 0) {
        sys.h(row, col) -= nb.w / a;
        continue;
      }
      if (bc == BoundaryCondition::dirichlet) continue;
      if (nb.y[0] == 0) continue;  // face potential 0
      if (nb.y[0] == lat.n + 1) {
        sys.offset(row) -= nb.w * (lat.n + 1.0) / a;
        continue;
      }
      sys.h(row, row) -= nb.w / a;  // insulated: the neighbour mirrors u(x)
    }
  }
  return sys;
}

}  // namespace rcm

#endif  // RCM_NUMERICS_DENSE_HPP
