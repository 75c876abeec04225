#pragma once

#include <stdexcept>
#include <string>

namespace thinhom {

enum class ErrorKind {
  invalid_argument,
  quadrature_nonconvergence,
  mesh_too_coarse,
  incompatible_periodic_trace,
  singular_flux,
  singular_jacobian,
  no_convergence,
  point_outside_domain,
  missing_cell_solution,
  forcing_not_reducible,
  parse_error,
  validation_error,
  io_error,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace thinhom
