#pragma once

#include <stdexcept>
#include <string>

namespace bdgkit {

// Base of every error raised by the library. `kind()` is stable and is what
// the command-line front end maps onto exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    invalid_grid,
    invalid_domain,
    shape,
    precondition,
    degenerate_constraint,
    convergence,
    indefinite,
    nullspace_verification,
    size,
    structure_violation,
    partial_result,
    unsupported,
    division,
    degenerate_input,
    io,
    usage,
    invariant,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Iterative method ran out of iterations; carries the last residual seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(Kind::convergence, what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

// A residual-based verification failed; carries the offending residual.
class VerificationError : public Error {
 public:
  VerificationError(Kind kind, const std::string& what, double residual)
      : Error(kind, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

[[noreturn]] inline void fail(Error::Kind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace bdgkit
