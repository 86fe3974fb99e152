#include "hyperq/error.hpp"

namespace hyperq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_action: return "invalid action";
    case ErrorCode::invalid_index: return "invalid index";
    case ErrorCode::invalid_order: return "invalid order";
    case ErrorCode::invalid_rank: return "invalid rank";
    case ErrorCode::invalid_hypergraph: return "invalid hypergraph";
    case ErrorCode::dimension: return "dimension mismatch";
    case ErrorCode::usage: return "usage error";
    case ErrorCode::range: return "range error";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::unsupported_structure: return "unsupported structure";
    case ErrorCode::incompatible_checkpoint: return "incompatible checkpoint";
    case ErrorCode::undefined_normalization: return "undefined normalization";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::config: return "config error";
  }
  return "error";
}

}  // namespace hyperq
