#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posebias/geometry.hpp"
#include "posebias/tensor.hpp"

namespace posebias::io {

// ---------------------------------------------------------------------------
// Tensor container: NPY version 1.0, '<f4', C order.
//
//   bytes 0..5   "\x93NUMPY"
//   bytes 6..7   major=1, minor=0
//   bytes 8..9   header length H (uint16 little-endian)
//   next H bytes ASCII dict {'descr': '<f4', 'fortran_order': False,
//                'shape': (d0, d1, ...), } padded with spaces and ending in
//                '\n' so that 10 + H is a multiple of 64
//   payload      prod(shape) little-endian float32 values
//
// Failures raise ParseError with the byte offset of the offending field.
// ---------------------------------------------------------------------------
inline constexpr const char *kTensorExtension = ".f32t";

std::vector<std::uint8_t> encode_tensor(const Tensor &t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const Tensor &t, const std::filesystem::path &path);
Tensor read_tensor(const std::filesystem::path &path);

// Exported tensors are stored one file per quantity per frame as
// `{frame}_{quantity}.f32t`. Both parts must match [A-Za-z0-9._-] and not
// start with '.'; anything else throws kInvalidArgument.
std::string tensor_file_name(std::string_view frame_id, std::string_view quantity);

// ---------------------------------------------------------------------------
// PLY meshes (vertex positions only).
// ---------------------------------------------------------------------------
struct MeshFile {
  std::vector<geometry::Vec3> vertices;
  // From a `comment diameter <mm>` header line, when present.
  std::optional<double> declared_diameter;
};

enum class PlyFormat { kAscii, kBinaryLittleEndian };

MeshFile decode_ply(std::span<const std::uint8_t> bytes);
MeshFile read_ply(const std::filesystem::path &path);
std::vector<std::uint8_t> encode_ply(const MeshFile &mesh, PlyFormat format);
void write_ply(const MeshFile &mesh, PlyFormat format, const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// PNG, 8-bit grayscale or RGB, non-interlaced.
// ---------------------------------------------------------------------------
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> samples;  // row-major, interleaved

  static ImageBuffer filled(int width, int height, int channels, std::uint8_t value = 0);

  std::uint8_t *pixel(int x, int y) {
    return samples.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t *pixel(int x, int y) const {
    return samples.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  bool operator==(const ImageBuffer &) const = default;
};

std::vector<std::uint8_t> encode_png(const ImageBuffer &image);
ImageBuffer decode_png(std::span<const std::uint8_t> bytes);
void write_png(const ImageBuffer &image, const std::filesystem::path &path);
ImageBuffer read_png(const std::filesystem::path &path);

// Whole-file helpers shared by the codecs. Throw ErrorCode::kIo.
std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path &path, const std::string &text);

}  // namespace posebias::io
