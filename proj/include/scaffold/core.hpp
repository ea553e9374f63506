#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace scaffold {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Failure categories shared by every module. The CLI maps them onto exit
/// codes (see cli_io).
enum class ErrorKind {
  parameter,
  geometry_out_of_cell,
  degenerate_element,
  orientation,
  topology,
  not_implemented,
  fitting_failure,
  singular_evaluation,
  assembly,
  solver,
  step_rejected,
  line_search_failure,
  numerical_breakdown,
  schema,
  io,
  missing_kernel_cache,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::geometry_out_of_cell: return "geometry-out-of-cell error";
    case ErrorKind::degenerate_element: return "degenerate-element error";
    case ErrorKind::orientation: return "orientation error";
    case ErrorKind::topology: return "topology error";
    case ErrorKind::not_implemented: return "not implemented";
    case ErrorKind::fitting_failure: return "fitting failure";
    case ErrorKind::singular_evaluation: return "singular evaluation";
    case ErrorKind::assembly: return "assembly error";
    case ErrorKind::solver: return "solver error";
    case ErrorKind::step_rejected: return "step rejected";
    case ErrorKind::line_search_failure: return "line-search failure";
    case ErrorKind::numerical_breakdown: return "numerical breakdown";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::io: return "io error";
    case ErrorKind::missing_kernel_cache: return "missing kernel cache";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace scaffold
