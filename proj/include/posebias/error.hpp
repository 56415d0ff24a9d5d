#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace posebias {

// Stable machine-readable error categories. The CLI prints `name()` in its
// JSON error record, so renaming an entry is a breaking change.
enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kShapeMismatch,
  kIo,
  kBadMagic,
  kBadVersion,
  kBadHeader,
  kUnsupportedDtype,
  kTruncated,
  kNonFinite,
  kPlyFormat,
  kPlyMissingProperty,
  kPlyCountMismatch,
  kPngUnsupported,
  kPngCorrupt,
  kManifestSchema,
  kManifestUnits,
  kManifestRotation,
  kManifestDuplicateFrame,
  kConfig,
  kPrediction,
  kExportMetadata,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_{code} {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failure at a known byte offset (or line, for text formats).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string &message, std::uint64_t offset)
      : Error(code, message + " (at offset " + std::to_string(offset) + ")"),
        offset_{offset} {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message) {
  throw Error(code, message);
}

}  // namespace posebias
