#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>

#include "posebias/io.hpp"

namespace posebias::io {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto *cursor = static_cast<ReadCursor *>(png_get_io_ptr(png));
  if (cursor->bytes.size() - cursor->pos < length) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cursor->bytes.data() + cursor->pos, length);
  cursor->pos += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto *out = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

// libpng reports fatal errors through longjmp. The message is copied here so
// the caller can rethrow after unwinding to setjmp.
struct ErrorSlot {
  char message[256] = {};
};

void error_callback(png_structp png, png_const_charp msg) {
  auto *slot = static_cast<ErrorSlot *>(png_get_error_ptr(png));
  std::strncpy(slot->message, msg, sizeof(slot->message) - 1);
  png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

ImageBuffer ImageBuffer::filled(int width, int height, int channels, std::uint8_t value) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3))
    fail(ErrorCode::kInvalidArgument, "image must be at least 1x1 with 1 or 3 channels");
  ImageBuffer img{width, height, channels, {}};
  img.samples.assign(static_cast<std::size_t>(width) * height * channels, value);
  return img;
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    fail(ErrorCode::kPngCorrupt, "not a PNG file (bad signature)");

  ErrorSlot slot;
  ReadCursor cursor{bytes, 0};
  ImageBuffer image;
  std::vector<png_bytep> rows;
  ErrorCode unsupported_code = ErrorCode::kPngCorrupt;
  std::string unsupported;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, error_callback,
                                           warning_callback);
  if (!png) fail(ErrorCode::kPngCorrupt, "cannot allocate PNG reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorCode::kPngCorrupt, "cannot allocate PNG info");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kPngCorrupt, std::string("PNG decode failed: ") + slot.message);
  }

  png_set_read_fn(png, &cursor, read_callback);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  const int interlace = png_get_interlace_type(png, info);

  if (bit_depth != 8) {
    unsupported_code = ErrorCode::kPngUnsupported;
    unsupported = "unsupported PNG bit depth " + std::to_string(bit_depth);
  } else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    unsupported_code = ErrorCode::kPngUnsupported;
    unsupported = "unsupported PNG color type " + std::to_string(color_type);
  } else if (interlace != PNG_INTERLACE_NONE) {
    unsupported_code = ErrorCode::kPngUnsupported;
    unsupported = "interlaced PNG is not supported";
  }
  if (!unsupported.empty()) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(unsupported_code, unsupported);
  }

  image.width = static_cast<int>(width);
  image.height = static_cast<int>(height);
  image.channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  image.samples.resize(static_cast<std::size_t>(width) * height * image.channels);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = image.samples.data() + static_cast<std::size_t>(y) * width * image.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

std::vector<std::uint8_t> encode_png(const ImageBuffer &image) {
  if (image.width < 1 || image.height < 1 || (image.channels != 1 && image.channels != 3) ||
      image.samples.size() !=
          static_cast<std::size_t>(image.width) * image.height * image.channels)
    fail(ErrorCode::kInvalidArgument, "image buffer has inconsistent dimensions");

  ErrorSlot slot;
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = const_cast<png_bytep>(image.samples.data()) +
              static_cast<std::size_t>(y) * image.width * image.channels;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, error_callback,
                                            warning_callback);
  if (!png) fail(ErrorCode::kIo, "cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorCode::kIo, "cannot allocate PNG info");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, std::string("PNG encode failed: ") + slot.message);
  }

  png_set_write_fn(png, &out, write_callback, flush_callback);
  // Fixed settings so identical images encode to identical bytes.
  png_set_compression_level(png, 3);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const ImageBuffer &image, const std::filesystem::path &path) {
  write_file(path, encode_png(image));
}

ImageBuffer read_png(const std::filesystem::path &path) { return decode_png(read_file(path)); }

}  // namespace posebias::io
