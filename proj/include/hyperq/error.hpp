#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperq {

enum class ErrorCode {
  invalid_action,
  invalid_index,
  invalid_order,
  invalid_rank,
  invalid_hypergraph,
  dimension,
  usage,
  range,
  overflow,
  unsupported_structure,
  incompatible_checkpoint,
  undefined_normalization,
  io,
  config,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` names the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hyperq
