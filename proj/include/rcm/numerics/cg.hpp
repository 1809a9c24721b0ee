#ifndef RCM_NUMERICS_CG_HPP
#define RCM_NUMERICS_CG_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/numerics/field.hpp"
#include "rcm/numerics/operator.hpp"
#include "rcm/numerics/summation.hpp"

namespace rcm {

struct CgResult {
  Field solution;
  double residual = 0.0;  // ||Hu - rhs||_2 on the unknowns
  int iterations = 0;
};

inline int default_max_iterations(const LaplacianOperator& op) {
  return static_cast<int>(std::max<std::size_t>(1000, 4 * op.unknown_count()));
}

namespace detail {

struct PcgOutput {
  std::vector<double> x;
  double residual = 0.0;
  int iterations = 0;
};

/// ||r / a||_2: the residual of the walk operator H for a residual r of L.
inline double walk_norm(std::span<const double> r, std::span<const double> a) {
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) s += (r[k] / a[k]) * (r[k] / a[k]);
  return std::sqrt(s);
}

inline void project_weighted_mean_zero(std::span<double> x, std::span<const double> a, double total_a) {
  double m = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) m += a[k] * x[k];
  m /= total_a;
  for (double& v : x) v -= m;
}

/// Jacobi-preconditioned CG for L x = b. Stops when ||(b - Lx)/a||_2 <= target.
/// In the periodic case b must sum to zero; iterates and search directions
/// are kept weighted-mean-zero, which leaves L x untouched.
inline PcgOutput pcg(const LaplacianOperator& op, std::span<const double> b, std::vector<double> x, double target,
                     int max_iter) {
  const std::size_t n = op.unknown_count();
  const auto a = op.site_weights();
  const auto diag = op.diagonal();
  const bool periodic = op.bc() == BoundaryCondition::periodic;
  double total_a = 0.0;
  for (double v : a) total_a += v;
  if (x.empty()) x.assign(n, 0.0);
  if (periodic) project_weighted_mean_zero(x, a, total_a);

  std::vector<double> r(n), z(n), p(n), q(n);
  auto true_residual = [&] {
    op.apply_symmetric(x, q);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
    return walk_norm(r, a);
  };

  PcgOutput out;
  double res = true_residual();
  int restarts = 0;
  while (res > target) {
    for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
    if (periodic) project_weighted_mean_zero(z, a, total_a);
    p = z;
    double rz = numerics::dot(r, z);
    bool converged = false;
    while (out.iterations < max_iter) {
      op.apply_symmetric(p, q);
      const double pq = numerics::dot(p, q);
      if (!(pq > 0)) break;
      const double alpha = rz / pq;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * q[k];
      }
      ++out.iterations;
      if (walk_norm(r, a) <= target) {
        converged = true;
        break;
      }
      for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
      if (periodic) project_weighted_mean_zero(z, a, total_a);
      const double rz_next = numerics::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    if (periodic) project_weighted_mean_zero(x, a, total_a);
    res = true_residual();
    if (res <= target) break;
    // the recurrence drifted from the true residual: restart from it
    if (out.iterations >= max_iter || !converged || ++restarts > 20)
      throw ConvergenceError("conjugate gradient did not reach the requested tolerance", res, out.iterations);
  }
  out.x = std::move(x);
  out.residual = res;
  return out;
}

}  // namespace detail

/// Solve Hu = rhs on the unknowns of `op`, boundary data from the operator.
/// Stops at ||Hu - rhs||_2 <= tol * ||rhs + boundary term||_2. For periodic
/// problems the solution has weighted mean zero.
inline CgResult cg_solve(const LaplacianOperator& op, const Field& rhs, double tol = 1e-10, int max_iter = 0,
                         const Field* initial = nullptr) {
  if (!(tol > 0)) throw ParameterError("cg_solve: tol must be positive");
  require_shape(op.lattice(), rhs);
  if (max_iter <= 0) max_iter = default_max_iterations(op);
  const std::size_t n = op.unknown_count();
  const auto a = op.site_weights();

  std::vector<double> b = op.boundary_rhs();
  for (std::size_t k = 0; k < n; ++k) b[k] += a[k] * rhs.values[op.site_of(k)];

  if (op.bc() == BoundaryCondition::periodic) {
    double mean = 0.0, scale = 0.0;
    for (double v : b) {
      mean += v;
      scale += std::abs(v);
    }
    if (std::abs(mean) > 1e-8 * scale)
      throw DomainError("periodic right-hand side must have weighted mean zero");
    mean /= static_cast<double>(n);
    for (double& v : b) v -= mean;
  }

  const double ref = detail::walk_norm(b, a);
  if (ref == 0.0) return {op.extend(std::vector<double>(n, 0.0)), 0.0, 0};

  std::vector<double> x0;
  if (initial != nullptr) x0 = op.restrict(*initial);
  auto out = detail::pcg(op, b, std::move(x0), tol * ref, max_iter);
  return {op.extend(out.x), out.residual, out.iterations};
}

}  // namespace rcm

#endif  // RCM_NUMERICS_CG_HPP
