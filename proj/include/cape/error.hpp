#pragma once

#include <stdexcept>
#include <string>

namespace cape {

enum class ErrorKind {
  invalid_argument,
  parse,
  shape_mismatch,
  empty_foreground,
  out_of_bounds,
  unreachable,
  mask_disconnection,
  unsupported_dimensionality,
  divergence,
};

/// Library-wide exception. The kind drives CLI exit codes and host-side
/// exception mapping; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cape
