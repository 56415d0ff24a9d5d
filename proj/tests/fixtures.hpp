#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "posebias/error.hpp"
#include "posebias/io.hpp"

namespace fixtures {

using Bytes = std::vector<std::uint8_t>;

inline Bytes text_bytes(const std::string &s) { return Bytes(s.begin(), s.end()); }

// PNG written straight through libpng with arbitrary depth and color type.
inline Bytes raw_png(int width, int height, int bit_depth, int color_type,
                     int interlace = PNG_INTERLACE_NONE) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  Bytes out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return {};
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto *o = static_cast<Bytes *>(png_get_io_ptr(p));
        o->insert(o->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, interlace,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_color palette[2] = {{0, 0, 0}, {255, 255, 255}};
    png_set_PLTE(png, info, palette, 2);
  }
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB         ? 3
                       : color_type == PNG_COLOR_TYPE_RGB_ALPHA ? 4
                       : color_type == PNG_COLOR_TYPE_GRAY_ALPHA ? 2
                                                                 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * bit_depth / 8 + 1;
  Bytes row(row_bytes, 0);
  const int passes = png_set_interlace_handling(png);
  for (int pass = 0; pass < passes; ++pass)
    for (int y = 0; y < height; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline Bytes valid_tensor() {
  return posebias::io::encode_tensor(posebias::Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
}

// Byte-level copy of a valid tensor file with its header text replaced. The
// header is re-padded to keep the 64-byte alignment.
inline Bytes tensor_with_header(std::string dict) {
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';
  Bytes out{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0, static_cast<std::uint8_t>(dict.size() & 0xff),
            static_cast<std::uint8_t>(dict.size() >> 8)};
  out.insert(out.end(), dict.begin(), dict.end());
  out.resize(out.size() + 24, 0);
  return out;
}

enum class Codec { kTensor, kPly, kPng };

struct Malformed {
  std::string name;
  Codec codec;
  Bytes bytes;
  posebias::ErrorCode expected;
};

inline std::vector<Malformed> malformed_fixtures() {
  using posebias::ErrorCode;
  std::vector<Malformed> out;

  Bytes bad_magic = valid_tensor();
  bad_magic[1] = 'X';
  out.push_back({"tensor bad magic", Codec::kTensor, bad_magic, ErrorCode::kBadMagic});

  Bytes bad_version = valid_tensor();
  bad_version[6] = 3;
  out.push_back({"tensor bad version", Codec::kTensor, bad_version, ErrorCode::kBadVersion});

  Bytes truncated = valid_tensor();
  truncated.resize(truncated.size() - 5);
  out.push_back({"tensor truncated payload", Codec::kTensor, truncated, ErrorCode::kTruncated});

  out.push_back({"tensor float64 dtype", Codec::kTensor,
                 tensor_with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (3,), }"),
                 ErrorCode::kUnsupportedDtype});

  out.push_back({"tensor missing shape", Codec::kTensor,
                 tensor_with_header("{'descr': '<f4', 'fortran_order': False, }"),
                 ErrorCode::kBadHeader});

  Bytes nan_payload = valid_tensor();
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_payload.data() + nan_payload.size() - 4, &nan, 4);
  out.push_back({"tensor NaN value", Codec::kTensor, nan_payload, ErrorCode::kNonFinite});

  out.push_back({"ply bad magic", Codec::kPly,
                 text_bytes("plx\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                            "property float y\nproperty float z\nend_header\n0 0 0\n"),
                 ErrorCode::kPlyFormat});

  out.push_back({"ply missing z", Codec::kPly,
                 text_bytes("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                            "property float y\nend_header\n0 0\n"),
                 ErrorCode::kPlyMissingProperty});

  out.push_back({"ply short body", Codec::kPly,
                 text_bytes("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                            "property float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n"),
                 ErrorCode::kPlyCountMismatch});

  out.push_back({"png 16-bit", Codec::kPng, raw_png(4, 3, 16, PNG_COLOR_TYPE_GRAY),
                 ErrorCode::kPngUnsupported});

  Bytes corrupt = posebias::io::encode_png(posebias::io::ImageBuffer::filled(4, 4, 3, 9));
  corrupt[0] = 0;
  out.push_back({"png bad signature", Codec::kPng, corrupt, ErrorCode::kPngCorrupt});
  return out;
}

// Decodes `bytes` with the given codec and returns the raised error code, or
// nothing when decoding succeeds.
inline std::optional<posebias::ErrorCode> decode_error(Codec codec, const Bytes &bytes) {
  try {
    switch (codec) {
      case Codec::kTensor: posebias::io::decode_tensor(bytes); break;
      case Codec::kPly: posebias::io::decode_ply(bytes); break;
      case Codec::kPng: posebias::io::decode_png(bytes); break;
    }
  } catch (const posebias::Error &e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace fixtures
