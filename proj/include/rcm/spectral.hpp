#ifndef RCM_SPECTRAL_HPP
#define RCM_SPECTRAL_HPP

#include <algorithm>
#include <cmath>

#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/numerics/eigen.hpp"
#include "rcm/numerics/operator.hpp"

namespace rcm {

/// Bottom Dirichlet eigenpair of H on the closed box and f = N^2 lambda.
/// psi has unit weighted norm, so lambda = edge_form(psi, psi); the
/// ordered-pair energy of psi is reported as well.
struct EigenSolution {
  double lambda = 0.0;
  Field psi;
  double f = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double edge_energy = 0.0;
  double ordered_energy = 0.0;
};

inline EigenSolution dirichlet_spectral_statistic(const Environment& env, double tol = 1e-10) {
  if (env.lattice.closure != Closure::closed_box)
    throw UsageError("dirichlet_spectral_statistic requires a closed_box environment");
  LaplacianOperator op(env, BoundaryCondition::dirichlet);
  EigenpairResult r = smallest_eigenpair(op, tol);
  EigenSolution out;
  out.lambda = r.lambda;
  out.f = static_cast<double>(env.n()) * env.n() * r.lambda;
  out.residual = r.residual;
  out.iterations = r.iterations;
  out.edge_energy = edge_form(op, r.psi, r.psi);
  out.ordered_energy = dirichlet_form(op, r.psi, r.psi);
  out.psi = std::move(r.psi);
  return out;
}

/// ||psi||_inf / lambda^{d/4}; the constant bounding it is not known.
inline double eigenfunction_sup_diagnostic(const EigenSolution& sol) {
  double sup = 0.0;
  for (double v : sol.psi.values) sup = std::max(sup, std::abs(v));
  return sup / std::pow(sol.lambda, sol.psi.lattice.d / 4.0);
}

/// Two one-edge inequalities for lambda,
/// with omega the environment after raising one edge:
///   lambda(omega) - lambda(sigma) <= kappa psi_sigma(e)^2
///   lambda(sigma) - lambda(omega) <= (gamma - 1) E_sigma(psi_omega, psi_omega),
///   gamma = ||psi_omega||_{2,N,sigma}^{-2}.
struct EigenPerturbationReport {
  bool holds = true;
  double lambda_sigma = 0.0;
  double lambda_omega = 0.0;
  double up_lhs = 0.0;
  double up_bound = 0.0;        // kappa psi_sigma(e)^2
  double up_sharp_bound = 0.0;  // (a(e, omega) - a(e, sigma)) psi_sigma(e)^2
  double down_lhs = 0.0;
  double down_bound = 0.0;
  double kappa = 1.0;

  explicit operator bool() const noexcept { return holds; }
};

/// `env` is sigma; omega has `edge` raised to `new_weight` >= current weight.
inline EigenPerturbationReport eigen_perturbation_check(const Environment& env, const Edge& edge, double new_weight,
                                                        double tol = 1e-10) {
  detail::require_edge(env, edge);
  if (env.lattice.closure != Closure::closed_box) throw UsageError("eigen_perturbation_check requires a closed_box");
  const double old_weight = env.weight(edge);
  if (!(new_weight >= old_weight)) throw UsageError("eigen_perturbation_check: new weight must not decrease");
  const LatticeSpec& lat = env.lattice;
  Coord y = lat.coords(edge.site);
  y[edge.dir] += 1;
  if (!lat.is_interior(lat.coords(edge.site)) && !lat.is_interior(y))
    throw UsageError("edge does not touch Q_N");

  const Environment omega = env.with_weight(edge, new_weight);
  const EigenSolution s_sigma = dirichlet_spectral_statistic(env, tol);
  const EigenSolution s_omega = dirichlet_spectral_statistic(omega, tol);
  const std::size_t far = env.step(edge.site, edge.dir, +1);
  const double ps = s_sigma.psi.values[far] - s_sigma.psi.values[edge.site];

  EigenPerturbationReport r;
  r.kappa = effective_kappa(env, new_weight);
  r.lambda_sigma = s_sigma.lambda;
  r.lambda_omega = s_omega.lambda;
  r.up_lhs = s_omega.lambda - s_sigma.lambda;
  r.up_bound = r.kappa * ps * ps;
  r.up_sharp_bound = (new_weight - old_weight) * ps * ps;

  // psi_omega measured in sigma's norm and energy
  LaplacianOperator op_sigma(env, BoundaryCondition::dirichlet);
  const double norm_sigma = weighted_inner(env, s_omega.psi, s_omega.psi);
  const double gamma = 1.0 / norm_sigma;
  r.down_lhs = s_sigma.lambda - s_omega.lambda;
  r.down_bound = (gamma - 1.0) * edge_form(op_sigma, s_omega.psi, s_omega.psi);

  const double eps = 1e-10 * std::max(s_sigma.lambda, s_omega.lambda);
  r.holds = r.up_lhs <= r.up_bound + eps && r.down_lhs <= r.down_bound + eps;
  return r;
}

}  // namespace rcm

#endif  // RCM_SPECTRAL_HPP
