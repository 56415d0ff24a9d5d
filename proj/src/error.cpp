#include "posebias/error.hpp"

namespace posebias {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kBehindCamera: return "behind_camera";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kBadVersion: return "bad_version";
    case ErrorCode::kBadHeader: return "bad_header";
    case ErrorCode::kUnsupportedDtype: return "unsupported_dtype";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kPlyFormat: return "ply_format";
    case ErrorCode::kPlyMissingProperty: return "ply_missing_property";
    case ErrorCode::kPlyCountMismatch: return "ply_count_mismatch";
    case ErrorCode::kPngUnsupported: return "png_unsupported";
    case ErrorCode::kPngCorrupt: return "png_corrupt";
    case ErrorCode::kManifestSchema: return "manifest_schema";
    case ErrorCode::kManifestUnits: return "manifest_units";
    case ErrorCode::kManifestRotation: return "manifest_rotation";
    case ErrorCode::kManifestDuplicateFrame: return "manifest_duplicate_frame";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kPrediction: return "prediction";
    case ErrorCode::kExportMetadata: return "export_metadata";
  }
  return "unknown";
}

}  // namespace posebias
