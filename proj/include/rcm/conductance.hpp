#ifndef RCM_CONDUCTANCE_HPP
#define RCM_CONDUCTANCE_HPP

#include <cmath>
#include <vector>

#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/numerics/cg.hpp"
#include "rcm/numerics/operator.hpp"

namespace rcm {

/// Potential v on the closed box with v = 0 on x(1) = 0, v = N+1 on
/// x(1) = N+1, the other faces insulated.
struct PotentialSolution {
  Field v;
  double flux_low = 0.0;     // current through the x(1) = 0 face
  double flux_high = 0.0;    // current through the x(1) = N+1 face
  double energy = 0.0;       // ordered-pair form E(v, v), insulated edges excluded
  double edge_energy = 0.0;  // each active edge once; equals (N+1) * flux
  double f = 0.0;            // N^{-d} E(v, v)
  double residual = 0.0;
  int iterations = 0;
};

/// Edge joining Q_N to a side face (x(j) in {0, N+1} for some j >= 2).
inline bool is_insulated_edge(const Environment& env, const Edge& e) {
  if (env.lattice.closure != Closure::closed_box || !env.has_edge(e.site, e.dir)) return false;
  const LatticeSpec& lat = env.lattice;
  const Coord x = lat.coords(e.site);
  Coord y = x;
  y[e.dir] += 1;
  const bool xi = lat.is_interior(x), yi = lat.is_interior(y);
  if (xi == yi) return false;
  const Coord& b = xi ? y : x;
  return b[0] >= 1 && b[0] <= lat.n;
}

/// Edge carrying current in the mixed problem: interior-interior or
/// interior to one of the two potential faces.
inline bool is_active_edge(const Environment& env, const Edge& e) {
  if (env.lattice.closure != Closure::closed_box || !env.has_edge(e.site, e.dir)) return false;
  const LatticeSpec& lat = env.lattice;
  Coord y = lat.coords(e.site);
  y[e.dir] += 1;
  const bool xi = lat.is_interior(lat.coords(e.site)), yi = lat.is_interior(y);
  return (xi || yi) && !is_insulated_edge(env, e);
}

inline PotentialSolution solve_mixed_potential(const Environment& env, double tol = 1e-10) {
  if (env.lattice.closure != Closure::closed_box)
    throw UsageError("solve_mixed_potential requires a closed_box environment");
  LaplacianOperator op(env, BoundaryCondition::mixed_faces);
  CgResult r = cg_solve(op, Field::zeros(env.lattice), tol);
  PotentialSolution out;
  out.v = std::move(r.solution);
  out.residual = r.residual;
  out.iterations = r.iterations;

  std::vector<double> low, high;
  for (std::size_t k = 0; k < op.unknown_count(); ++k) {
    const double vx = out.v.values[op.site_of(k)];
    for (const auto& l : op.links(k)) {
      if (l.kind != LaplacianOperator::LinkKind::fixed_face) continue;
      if (l.fixed == op.low_face())
        low.push_back(l.weight * (vx - l.fixed));
      else
        high.push_back(l.weight * (l.fixed - vx));
    }
  }
  out.flux_low = numerics::pairwise_sum(low);
  out.flux_high = numerics::pairwise_sum(high);
  out.energy = dirichlet_form(op, out.v, out.v);
  out.edge_energy = edge_form(op, out.v, out.v);
  out.f = out.energy / std::pow(static_cast<double>(env.n()), env.d());
  return out;
}

/// solve_mixed_potential followed by the energy-flux identity at both faces;
/// a miss beyond 1e-8 relative throws ConvergenceError.
inline PotentialSolution checked_mixed_potential(const Environment& env, double tol = 1e-10) {
  PotentialSolution s = solve_mixed_potential(env, tol);
  const double n1 = env.n() + 1.0;
  for (double flux : {s.flux_low, s.flux_high})
    if (std::abs(s.edge_energy - n1 * flux) > 1e-8 * s.edge_energy)
      throw ConvergenceError("energy-flux identity violated", s.residual, s.iterations);
  return s;
}

/// f_N = N^{-d} E(v, v).
inline double effective_conductance(const Environment& env, double tol = 1e-10) {
  return checked_mixed_potential(env, tol).f;
}

/// Perturbation check for the conductance statistic under a one-edge change.
inline PerturbationReport conductance_perturbation_check(const Environment& env, const Edge& edge, double new_weight,
                                                         double tol = 1e-10) {
  detail::require_edge(env, edge);
  if (!is_active_edge(env, edge)) throw UsageError("edge carries no current in the mixed problem");
  const Environment sigma = env.with_weight(edge, new_weight);
  const PotentialSolution s_omega = solve_mixed_potential(env, tol);
  const PotentialSolution s_sigma = solve_mixed_potential(sigma, tol);
  const double scale = std::pow(static_cast<double>(env.n()), -env.d());
  const std::size_t far = env.step(edge.site, edge.dir, +1);
  const double dw = s_omega.v.values[far] - s_omega.v.values[edge.site];
  const double ds = s_sigma.v.values[far] - s_sigma.v.values[edge.site];

  PerturbationReport r;
  r.kappa = effective_kappa(env, new_weight);
  r.lhs.push_back(scale * std::abs(s_omega.edge_energy - s_sigma.edge_energy));
  r.bound.push_back(r.kappa * scale * (dw * dw + ds * ds));
  detail::finish_report(r, {std::abs(s_omega.f - s_sigma.f)});
  return r;
}

}  // namespace rcm

#endif  // RCM_CONDUCTANCE_HPP
