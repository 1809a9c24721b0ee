#ifndef RCM_NUMERICS_EIGEN_HPP
#define RCM_NUMERICS_EIGEN_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/numerics/cg.hpp"
#include "rcm/numerics/operator.hpp"

namespace rcm {

struct EigenpairResult {
  double lambda = 0.0;
  Field psi;              // zero on the boundary, sum(psi^2 a) = 1, sum(psi) > 0
  double residual = 0.0;  // ||H psi - lambda psi||_2
  int iterations = 0;     // outer (inverse power) steps
  int inner_iterations = 0;
};

/// Bottom eigenpair of the Dirichlet walk operator by inverse iteration.
/// Each step solves H y = psi by CG, warm-started from psi / lambda.
inline EigenpairResult smallest_eigenpair(const LaplacianOperator& op, double tol = 1e-10, int max_outer = 2000) {
  if (op.bc() != BoundaryCondition::dirichlet) throw UsageError("smallest_eigenpair requires the dirichlet operator");
  if (!(tol > 0)) throw ParameterError("smallest_eigenpair: tol must be positive");
  const std::size_t n = op.unknown_count();
  const auto a = op.site_weights();
  const LatticeSpec& lat = op.lattice();

  auto normalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += v[k] * v[k] * a[k];
    const double inv = 1.0 / std::sqrt(s);
    for (double& x : v) x *= inv;
  };

  std::vector<double> psi(n), lpsi(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Coord c = lat.coords(op.site_of(k));
    double v = 1.0;
    for (int i = 0; i < lat.d; ++i) v *= std::sin(std::numbers::pi * c[i] / (lat.n + 1));
    psi[k] = v;
  }
  normalize(psi);

  EigenpairResult out;
  auto rayleigh = [&] {
    op.apply_symmetric(psi, lpsi);
    out.lambda = numerics::dot(psi, lpsi);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = lpsi[k] / a[k] - out.lambda * psi[k];
      s += r * r;
    }
    out.residual = std::sqrt(s);
  };
  rayleigh();

  const int inner_cap = default_max_iterations(op);
  std::vector<double> b(n), y(n);
  while (out.residual > tol) {
    if (out.iterations >= max_outer)
      throw ConvergenceError("inverse iteration did not converge", out.residual, out.iterations);
    double psi_norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      b[k] = a[k] * psi[k];
      y[k] = psi[k] / out.lambda;
      psi_norm += psi[k] * psi[k];
    }
    auto solved = detail::pcg(op, b, y, 0.1 * tol * std::sqrt(psi_norm), inner_cap);
    out.inner_iterations += solved.iterations;
    psi = std::move(solved.x);
    normalize(psi);
    rayleigh();
    ++out.iterations;
  }

  double total = 0.0;
  for (double v : psi) total += v;
  if (total < 0)
    for (double& v : psi) v = -v;
  out.psi = op.extend(psi);
  return out;
}

}  // namespace rcm

#endif  // RCM_NUMERICS_EIGEN_HPP
