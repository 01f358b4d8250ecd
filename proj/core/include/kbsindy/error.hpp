#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kbsindy {

enum class ErrorKind {
  schema,
  parse,
  validation,
  config,
  shape,
  numerical,
  arithmetic,
  integration,
  unsupported,
  insufficient_data,
  undefined_metric,
  comparison,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can report it as JSON without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kbsindy
