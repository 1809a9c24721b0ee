#ifndef RCM_ERRORS_HPP
#define RCM_ERRORS_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace rcm {

/// Invalid distribution or lattice parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A call whose preconditions do not hold (wrong boundary condition,
/// non-neighbour pair, shape mismatch...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Right-hand side outside the range of the operator.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Unreadable, truncated or version-mismatched file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what + " (residual " + format(last_residual) + " after " + std::to_string(iterations) +
                           " iterations)"),
        residual_(last_residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  double residual_;
  int iterations_;
};

}  // namespace rcm

#endif  // RCM_ERRORS_HPP
