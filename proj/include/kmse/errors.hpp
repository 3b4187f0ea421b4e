#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kmse {

// Bad arguments: dimension mismatches, out-of-range parameters, malformed files.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameter combinations that are individually valid but incompatible,
// e.g. a Landweber step larger than 1/kappa^2.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class definiteness_error : public std::runtime_error {
 public:
  definiteness_error(std::size_t pivot_index, double pivot)
      : std::runtime_error("matrix is not positive definite: pivot " +
                           std::to_string(pivot_index) + " = " + std::to_string(pivot)),
        pivot_index_(pivot_index) {}
  std::size_t pivot_index() const noexcept { return pivot_index_; }

 private:
  std::size_t pivot_index_;
};

class degenerate_bandwidth_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative estimator blew up; almost always a step size above 1/kappa^2.
class step_size_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public input_error {
 public:
  parse_error(const std::string& what, std::size_t line)
      : input_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class unsupported_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace kmse
