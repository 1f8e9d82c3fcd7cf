#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace xnec {

enum class Errc {
  invalid_argument,
  validation,
  corrupt_video,
  empty_telemetry,
  version_mismatch,
  unknown_id,
  arity,
  undefined,
  too_short,
  divergence,
  not_found,
  conflict,
  io,
};

const char* to_string(Errc code);

// Single exception type for the library. `field` names the offending input
// field when the error is a validation failure, empty otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  Errc code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Errc code_;
  std::string field_;
};

}  // namespace xnec
