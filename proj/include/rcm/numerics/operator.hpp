#ifndef RCM_NUMERICS_OPERATOR_HPP
#define RCM_NUMERICS_OPERATOR_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/numerics/field.hpp"
#include "rcm/numerics/summation.hpp"

namespace rcm {

/// periodic: torus environment, all sites are unknowns.
/// dirichlet: closed box, u = 0 on the boundary.
/// mixed_faces: closed box, u fixed on the two faces x(1) = 0 and x(1) = N+1,
///              the remaining faces insulated (their edges carry no current).
enum class BoundaryCondition { periodic, dirichlet, mixed_faces };

inline std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::periodic: return "periodic";
    case BoundaryCondition::dirichlet: return "dirichlet";
    case BoundaryCondition::mixed_faces: return "mixed_faces";
  }
  return "?";
}

/// Matrix-free walk Laplacian Hu(x) = u(x) - (1/a(x)) sum_y a(x,y) u(y) on
/// Q_N, together with its symmetric form L = diag(a) H acting on the
/// unknowns. Holds a reference to the environment, which must outlive it.
class LaplacianOperator {
 public:
  enum class LinkKind : std::uint8_t { interior, zero_boundary, fixed_face, insulated };

  struct Link {
    std::size_t site;        // neighbour's lattice index
    std::int64_t unknown;    // neighbour's unknown index, -1 if on the boundary
    double weight;           // a(x, y)
    double fixed;            // boundary value for fixed_face links
    LinkKind kind;
    std::int8_t dir;
    std::int8_t wrap;        // +1 / -1 when the step crosses the torus seam
  };

  LaplacianOperator(const Environment& env, BoundaryCondition bc, double low_face = 0.0,
                    std::optional<double> high_face = std::nullopt)
      : env_(&env), bc_(bc), low_(low_face), high_(high_face.value_or(env.n() + 1.0)) {
    const bool torus = env.lattice.closure == Closure::torus;
    if (bc == BoundaryCondition::periodic && !torus)
      throw UsageError("periodic boundary condition requires a torus environment");
    if (bc != BoundaryCondition::periodic && torus)
      throw UsageError(to_string(bc) + " boundary condition requires a closed_box environment");
    build();
  }

  const Environment& env() const noexcept { return *env_; }
  const LatticeSpec& lattice() const noexcept { return env_->lattice; }
  BoundaryCondition bc() const noexcept { return bc_; }
  double low_face() const noexcept { return low_; }
  double high_face() const noexcept { return high_; }

  std::size_t unknown_count() const noexcept { return sites_.size(); }
  std::size_t site_of(std::size_t k) const noexcept { return sites_[k]; }
  std::int64_t unknown_of(std::size_t site) const noexcept { return unknown_of_[site]; }
  const std::vector<std::size_t>& sites() const noexcept { return sites_; }

  /// a(x) for unknown k (all incident edges, including insulated ones).
  double site_weight(std::size_t k) const noexcept { return a_[k]; }
  std::span<const double> site_weights() const noexcept { return a_; }
  /// Diagonal of L: a(x) minus the insulated edges.
  std::span<const double> diagonal() const noexcept { return diag_; }

  std::span<const Link> links(std::size_t k) const noexcept {
    return std::span<const Link>(links_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  /// y = L x on the unknowns, boundary data excluded.
  void apply_symmetric(std::span<const double> x, std::span<double> y) const noexcept {
    for (std::size_t k = 0; k < sites_.size(); ++k) {
      double acc = diag_[k] * x[k];
      for (const Link& l : links(k))
        if (l.kind == LinkKind::interior) acc -= l.weight * x[static_cast<std::size_t>(l.unknown)];
      y[k] = acc;
    }
  }

  /// Contribution of the fixed boundary values to the symmetric system
  /// (L u = b + boundary_rhs()).
  std::vector<double> boundary_rhs() const {
    std::vector<double> b(sites_.size(), 0.0);
    for (std::size_t k = 0; k < sites_.size(); ++k)
      for (const Link& l : links(k))
        if (l.kind == LinkKind::fixed_face) b[k] += l.weight * l.fixed;
    return b;
  }

  /// Hu on Q_N with the boundary condition's values substituted
  /// (0 for dirichlet, face potentials and insulation for mixed_faces).
  /// The result is zero off the unknowns.
  Field apply(const Field& u) const {
    require_shape(lattice(), u);
    Field out = Field::zeros(lattice());
    for (std::size_t k = 0; k < sites_.size(); ++k) {
      const std::size_t s = sites_[k];
      double acc = 0.0;
      for (const Link& l : links(k)) {
        switch (l.kind) {
          case LinkKind::interior: acc += l.weight * (u.values[l.site] + l.wrap * u.wrap_jump[l.dir]); break;
          case LinkKind::zero_boundary: break;
          case LinkKind::fixed_face: acc += l.weight * l.fixed; break;
          case LinkKind::insulated: acc += l.weight * u.values[s]; break;
        }
      }
      out.values[s] = u.values[s] - acc / a_[k];
    }
    return out;
  }

  /// Scatter unknown values onto the whole lattice. Dirichlet boundary gets
  /// 0; for mixed_faces the x(1) faces get their potentials (they win at box
  /// edges and corners) and every other boundary site copies the interior
  /// site obtained by clamping its coordinates into 1..N.
  Field extend(std::span<const double> x) const {
    Field out = Field::zeros(lattice());
    for (std::size_t k = 0; k < sites_.size(); ++k) out.values[sites_[k]] = x[k];
    if (bc_ != BoundaryCondition::mixed_faces) return out;
    const auto& lat = lattice();
    for (std::size_t s = 0; s < out.values.size(); ++s) {
      if (unknown_of_[s] >= 0) continue;
      Coord c = lat.coords(s);
      if (c[0] == 0) {
        out.values[s] = low_;
      } else if (c[0] == lat.n + 1) {
        out.values[s] = high_;
      } else {
        for (int i = 1; i < lat.d; ++i) c[i] = std::clamp(c[i], 1, lat.n);
        out.values[s] = x[static_cast<std::size_t>(unknown_of_[lat.index(c)])];
      }
    }
    return out;
  }

  /// Values of u at the unknowns.
  std::vector<double> restrict(const Field& u) const {
    std::vector<double> x(sites_.size());
    for (std::size_t k = 0; k < sites_.size(); ++k) x[k] = u.values[sites_[k]];
    return x;
  }

  /// u(y) seen from x along link l, using the field's own stored values.
  static double neighbour_value(const Field& u, const Link& l) noexcept {
    return u.values[l.site] + l.wrap * u.wrap_jump[l.dir];
  }

 private:
  void build() {
    const Environment& env = *env_;
    const LatticeSpec& lat = env.lattice;
    const std::size_t count = lat.site_count();
    unknown_of_.assign(count, -1);
    for (std::size_t s = 0; s < count; ++s)
      if (lat.is_interior(lat.coords(s))) {
        unknown_of_[s] = static_cast<std::int64_t>(sites_.size());
        sites_.push_back(s);
      }
    offsets_.reserve(sites_.size() + 1);
    offsets_.push_back(0);
    a_.reserve(sites_.size());
    diag_.reserve(sites_.size());
    for (std::size_t s : sites_) {
      const Coord c = lat.coords(s);
      double a = 0.0, diag = 0.0;
      for (int i = 0; i < lat.d; ++i) {
        for (int sign : {+1, -1}) {
          const std::size_t nb = env.step(s, i, sign);
          const double w = sign > 0 ? env.weight(s, i) : env.weight(nb, i);
          std::int8_t wrap = 0;
          if (lat.closure == Closure::torus) {
            if (sign > 0 && c[i] == lat.n - 1) wrap = 1;
            if (sign < 0 && c[i] == 0) wrap = -1;
          }
          Link l{nb, unknown_of_[nb], w, 0.0, LinkKind::interior, static_cast<std::int8_t>(i), wrap};
          if (l.unknown < 0) {
            const Coord y = lat.coords(nb);
            if (bc_ == BoundaryCondition::dirichlet) {
              l.kind = LinkKind::zero_boundary;
            } else if (y[0] == 0 || y[0] == lat.n + 1) {
              l.kind = LinkKind::fixed_face;
              l.fixed = y[0] == 0 ? low_ : high_;
            } else {
              l.kind = LinkKind::insulated;
            }
          }
          a += w;
          if (l.kind != LinkKind::insulated) diag += w;
          links_.push_back(l);
        }
      }
      a_.push_back(a);
      diag_.push_back(diag);
      offsets_.push_back(links_.size());
    }
  }

  const Environment* env_;
  BoundaryCondition bc_;
  double low_;
  double high_;
  std::vector<std::size_t> sites_;
  std::vector<std::int64_t> unknown_of_;
  std::vector<double> a_;
  std::vector<double> diag_;
  std::vector<Link> links_;
  std::vector<std::size_t> offsets_;
};

/// Hu for the given boundary condition.
inline Field apply_operator(const Environment& env, BoundaryCondition bc, const Field& u) {
  return LaplacianOperator(env, bc).apply(u);
}

/// (u, v)_N = sum over Q_N of u(x) v(x) a(x).
inline double weighted_inner(const Environment& env, const Field& u, const Field& v) {
  require_shape(env.lattice, u);
  require_same_shape(u, v);
  std::vector<double> terms;
  terms.reserve(u.size());
  for (std::size_t s = 0; s < u.size(); ++s)
    if (env.lattice.is_interior(env.lattice.coords(s))) terms.push_back(u.values[s] * v.values[s] * site_weight(env, s));
  return numerics::pairwise_sum(terms);
}

inline double weighted_inner(const Environment& env, const VectorField& u, const VectorField& v) {
  if (u.size() != v.size()) throw UsageError("vector fields of different arity");
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) total += weighted_inner(env, u[i], v[i]);
  return total;
}

/// Dirichlet form over ordered pairs (x, y): x in Q_N, y an admissible
/// neighbour. Edges inside Q_N are counted from both ends, edges to the
/// boundary once, insulated edges not at all.
inline double dirichlet_form(const LaplacianOperator& op, const Field& u, const Field& v) {
  require_shape(op.lattice(), u);
  require_same_shape(u, v);
  std::vector<double> terms(op.unknown_count());
  for (std::size_t k = 0; k < op.unknown_count(); ++k) {
    const std::size_t s = op.site_of(k);
    double acc = 0.0;
    for (const auto& l : op.links(k)) {
      if (l.kind == LaplacianOperator::LinkKind::insulated) continue;
      acc += l.weight * (u.values[s] - LaplacianOperator::neighbour_value(u, l)) *
             (v.values[s] - LaplacianOperator::neighbour_value(v, l));
    }
    terms[k] = acc;
  }
  return numerics::pairwise_sum(terms);
}

/// Each admissible edge counted exactly once. This is the form for which
/// (Hu, v)_N equals the energy under every boundary condition.
inline double edge_form(const LaplacianOperator& op, const Field& u, const Field& v) {
  require_shape(op.lattice(), u);
  require_same_shape(u, v);
  std::vector<double> terms(op.unknown_count());
  for (std::size_t k = 0; k < op.unknown_count(); ++k) {
    const std::size_t s = op.site_of(k);
    double acc = 0.0;
    for (const auto& l : op.links(k)) {
      if (l.kind == LaplacianOperator::LinkKind::insulated) continue;
      const double share = l.kind == LaplacianOperator::LinkKind::interior ? 0.5 : 1.0;
      acc += share * l.weight * (u.values[s] - LaplacianOperator::neighbour_value(u, l)) *
             (v.values[s] - LaplacianOperator::neighbour_value(v, l));
    }
    terms[k] = acc;
  }
  return numerics::pairwise_sum(terms);
}

inline Eigen::MatrixXd dirichlet_form_matrix(const LaplacianOperator& op, const VectorField& u, const VectorField& v) {
  if (u.size() != v.size()) throw UsageError("vector fields of different arity");
  const auto m = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = dirichlet_form(op, u[i], v[j]);
  return out;
}

inline double dirichlet_form(const Environment& env, BoundaryCondition bc, const Field& u, const Field& v) {
  return dirichlet_form(LaplacianOperator(env, bc), u, v);
}

inline Eigen::MatrixXd dirichlet_form(const Environment& env, BoundaryCondition bc, const VectorField& u,
                                      const VectorField& v) {
  return dirichlet_form_matrix(LaplacianOperator(env, bc), u, v);
}

}  // namespace rcm

#endif  // RCM_NUMERICS_OPERATOR_HPP
