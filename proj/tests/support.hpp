#ifndef RCM_TESTS_SUPPORT_HPP
#define RCM_TESTS_SUPPORT_HPP

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rcm/environment.hpp"
#include "rcm/potential_walk.hpp"
#include "rcm/numerics/dense.hpp"
#include "rcm/numerics/field.hpp"

namespace rcm::testing {

inline Environment torus_env(int d, int n, const DistributionSpec& dist, std::uint64_t seed) {
  return sample_environment({d, n, Closure::torus}, dist, seed);
}

inline Environment box_env(int d, int n, const DistributionSpec& dist, std::uint64_t seed) {
  return sample_environment({d, n, Closure::closed_box}, dist, seed);
}

/// Field with i.i.d. standard normal values, drawn with the standard library
/// generator (not the library's own RNG).
inline Field random_field(const LatticeSpec& lat, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  Field f = Field::zeros(lat);
  for (double& v : f.values) v = g(gen);
  return f;
}

/// Zero outside Q_N.
inline Field random_interior_field(const LatticeSpec& lat, std::uint64_t seed) {
  Field f = random_field(lat, seed);
  for (std::size_t s = 0; s < f.size(); ++s)
    if (!lat.is_interior(lat.coords(s))) f.values[s] = 0.0;
  return f;
}

inline Eigen::VectorXd gather(const DenseSystem& sys, const Field& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(sys.sites.size()));
  for (std::size_t k = 0; k < sys.sites.size(); ++k) v(static_cast<Eigen::Index>(k)) = f.values[sys.sites[k]];
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Dense corrector: minimum-norm solve of h chi_i = -H g_i, then weighted
// mean removed. H g_i(x) = -(a(x, x+e_i) - a(x, x-e_i)) / a(x).
inline std::vector<Eigen::VectorXd> dense_corrector(const Environment& env) {
  const DenseSystem sys = dense_oracle(env, BoundaryCondition::periodic);
  const LatticeSpec& lat = env.lattice;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sys.h);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < lat.d; ++i) {
    Eigen::VectorXd rhs(sys.h.rows());
    for (Eigen::Index r = 0; r < rhs.size(); ++r) {
      const Coord x = lat.coords(sys.sites[r]);
      Coord down = x;
      down[i] = (down[i] + lat.n - 1) % lat.n;
      const double up_w = env.weights[lat.index(x) * lat.d + i];
      const double down_w = env.weights[lat.index(down) * lat.d + i];
      rhs(r) = (up_w - down_w) / sys.weight(r);
    }
    Eigen::VectorXd chi = cod.solve(rhs);
    chi.array() -= chi.dot(sys.weight) / sys.weight.sum();
    out.push_back(chi);
  }
  return out;
}

// D = a(Q)^{-1} sum_x sum_{y~x} a(x,y) dv dv', increments of g across the seam are +-1.
inline Eigen::MatrixXd dense_diffusion(const Environment& env, const std::vector<Eigen::VectorXd>& chi) {
  const LatticeSpec& lat = env.lattice;
  const int d = lat.d;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  double total = 0;
  for (std::size_t s = 0; s < lat.site_count(); ++s) {
    const Coord x = lat.coords(s);
    for (int j = 0; j < d; ++j)
      for (int sign : {1, -1}) {
        Coord y = x;
        y[j] = (y[j] + sign + lat.n) % lat.n;
        const double w = sign > 0 ? env.weights[s * d + j] : env.weights[lat.index(y) * d + j];
        Eigen::VectorXd dv(d);
        for (int i = 0; i < d; ++i) dv(i) = (i == j ? sign : 0) + chi[i](lat.index(y)) - chi[i](s);
        m += w * dv * dv.transpose();
        total += w;
      }
  }
  return m / total;
}

// (I - B) assembled from coordinates alone: B(x, z) = a(x,z) / (a(x) (1 + V(x))),
// walk absorbed on leaving the box.
struct DenseKilled {
  std::vector<Coord> sites;
  Eigen::MatrixXd g;

  std::size_t at(const Coord& x) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i] == x) return i;
    throw std::out_of_range("site");
  }
};

inline double law_weight(const ConductanceLaw& law, Coord x, int d, int dir, int sign) {
  if (sign < 0) x[dir] -= 1;
  return draw_edge_weight(law.dist, law.seed, x, d, dir);
}

inline Eigen::MatrixXd i_minus_b(const Box& box, const ConductanceLaw& law, const PotentialField& pot,
                          std::vector<Coord>& sites) {
  const int d = box.d;
  sites.clear();
  Coord c{};
  std::function<void(int)> rec = [&](int i) {
    if (i == d) {
      sites.push_back(c);
      return;
    }
    for (int k = 0; k < box.side; ++k) {
      c[i] = box.lower[i] + k;
      rec(i + 1);
    }
  };
  rec(0);
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Coord x = sites[r];
    double a = 0;
    for (int i = 0; i < d; ++i)
      for (int s : {1, -1}) a += law_weight(law, x, d, i, s);
    const double kill = 1.0 / (a * (1.0 + pot.V(x)));
    for (int i = 0; i < d; ++i)
      for (int s : {1, -1}) {
        Coord y = x;
        y[i] += s;
        if (!box.contains(y)) continue;
        const auto col = std::find(sites.begin(), sites.end(), y) - sites.begin();
        m(r, col) -= law_weight(law, x, d, i, s) * kill;
      }
  }
  return m;
}

inline DenseKilled dense_green(const Box& box, const ConductanceLaw& law, const PotentialField& pot,
                        std::vector<Coord> removed = {}) {
  DenseKilled out;
  std::vector<Coord> sites;
  const Eigen::MatrixXd m = i_minus_b(box, law, pot, sites);
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (std::find(removed.begin(), removed.end(), sites[i]) == removed.end()) {
      keep.push_back(static_cast<Eigen::Index>(i));
      out.sites.push_back(sites[i]);
    }
  Eigen::MatrixXd sub(keep.size(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < keep.size(); ++j) sub(i, j) = m(keep[i], keep[j]);
  out.g = sub.inverse();
  return out;
}

}  // namespace rcm::testing

#endif  // RCM_TESTS_SUPPORT_HPP
