#include "pathoquant/error.hpp"

namespace pq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kCorruptImage: return "corrupt_image";
    case ErrorCode::kImageTooLarge: return "image_too_large";
    case ErrorCode::kInvalidScale: return "invalid_scale";
    case ErrorCode::kDegenerateStains: return "degenerate_stains";
    case ErrorCode::kInvalidTileGeometry: return "invalid_tile_geometry";
    case ErrorCode::kBackendFailure: return "backend_failure";
    case ErrorCode::kInvalidGate: return "invalid_gate";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidWindow: return "invalid_window";
    case ErrorCode::kInvalidParameter: return "bad_parameter";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kStorageUnavailable: return "storage_unavailable";
    case ErrorCode::kKeyInvalid: return "key_invalid";
    case ErrorCode::kOverloaded: return "overloaded";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

}  // namespace pq
