#include "kbsindy/error.hpp"

namespace kbsindy {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::schema: return "schema_error";
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::validation: return "validation_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::shape: return "shape_error";
    case ErrorKind::numerical: return "numerical_error";
    case ErrorKind::arithmetic: return "arithmetic_error";
    case ErrorKind::integration: return "integration_error";
    case ErrorKind::unsupported: return "unsupported_error";
    case ErrorKind::insufficient_data: return "insufficient_data_error";
    case ErrorKind::undefined_metric: return "undefined_metric_error";
    case ErrorKind::comparison: return "comparison_error";
    case ErrorKind::io: return "io_error";
  }
  return "error";
}

}  // namespace kbsindy
