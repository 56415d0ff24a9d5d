#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>

#include "posebias/io.hpp"

namespace posebias {

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (dims_.empty()) fail(ErrorCode::kInvalidArgument, "tensor must have at least one dimension");
  std::size_t count = 1;
  for (std::size_t d : dims_) {
    if (d == 0) fail(ErrorCode::kInvalidArgument, "tensor dimensions must be positive");
    count *= d;
  }
  if (count != data_.size())
    fail(ErrorCode::kInvalidArgument, "tensor data length " + std::to_string(data_.size()) +
                                          " does not match dims product " +
                                          std::to_string(count));
  for (float v : data_)
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "tensor contains a non-finite value");
}

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
  const std::size_t count = std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                                            std::multiplies<>());
  return Tensor(std::move(dims), std::vector<float>(dims.empty() ? 0 : count, 0.0f));
}

namespace io {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleSize = 10;
constexpr std::size_t kAlignment = 64;

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::string shape_literal(const std::vector<std::size_t> &dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  if (dims.size() == 1) s += ",";
  return s + ")";
}

// Parser for the header dict. Offsets reported relative to the file start.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::size_t base) : text_{text}, base_{base} {}

  void parse(std::string &descr, bool &fortran, std::vector<std::size_t> &shape) {
    bool have_descr = false;
    bool have_fortran = false;
    bool have_shape = false;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::size_t key_at = pos_;
      const std::string key = quoted();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        descr = quoted();
        have_descr = true;
      } else if (key == "fortran_order") {
        fortran = boolean();
        have_fortran = true;
      } else if (key == "shape") {
        shape = tuple();
        have_shape = true;
      } else {
        error("unknown header key '" + key + "'", key_at);
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') error("expected ',' or '}'", pos_);
    }
    if (!have_descr || !have_fortran || !have_shape)
      error("header must define descr, fortran_order and shape", pos_);
    skip_ws();
    if (pos_ != text_.size()) error("trailing characters after header dict", pos_);
  }

 private:
  [[noreturn]] void error(const std::string &what, std::size_t at) const {
    throw ParseError(ErrorCode::kBadHeader, "tensor header: " + what, base_ + at);
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\t'))
      ++pos_;
  }
  void expect(char c) {
    if (peek() != c) error(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }
  std::string quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') error("expected quoted string", pos_);
    const std::size_t start = ++pos_;
    while (pos_ < text_.size() && text_[pos_] != q) ++pos_;
    if (pos_ >= text_.size()) error("unterminated string", start);
    return std::string(text_.substr(start, pos_++ - start));
  }
  bool boolean() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    error("expected True or False", pos_);
  }
  std::vector<std::size_t> tuple() {
    const std::size_t start = pos_;
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      const std::size_t num_at = pos_;
      std::size_t value = 0;
      bool any = false;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        value = value * 10 + static_cast<std::size_t>(text_[pos_++] - '0');
        any = true;
      }
      if (!any) error("expected dimension", num_at);
      if (value == 0) error("zero-length dimension", num_at);
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ')') error("expected ',' or ')'", pos_);
    }
    if (dims.empty()) error("zero-dimensional shape", start);
    return dims;
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor &t) {
  if (t.rank() == 0) fail(ErrorCode::kInvalidArgument, "cannot write a tensor without dims");
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " +
                       shape_literal(t.dims()) + ", }";
  const std::size_t unpadded = kPreambleSize + header.size() + 1;
  header.append((kAlignment - unpadded % kAlignment) % kAlignment, ' ');
  header += '\n';
  if (header.size() > 0xffff)
    fail(ErrorCode::kInvalidArgument, "tensor header too long for version 1.0");

  std::vector<std::uint8_t> out(kPreambleSize + header.size() + 4 * t.size());
  std::memcpy(out.data(), kMagic, sizeof(kMagic));
  out[6] = 1;
  out[7] = 0;
  out[8] = static_cast<std::uint8_t>(header.size() & 0xff);
  out[9] = static_cast<std::uint8_t>(header.size() >> 8);
  std::memcpy(out.data() + kPreambleSize, header.data(), header.size());
  const std::size_t payload_at = kPreambleSize + header.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(t.data()[i]));
    std::memcpy(out.data() + payload_at + 4 * i, &bits, 4);
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0)
    throw ParseError(ErrorCode::kBadMagic, "not a tensor container (bad magic)", 0);
  if (bytes.size() < 8) throw ParseError(ErrorCode::kTruncated, "missing version", bytes.size());
  if (bytes[6] != 1 || bytes[7] != 0)
    throw ParseError(ErrorCode::kBadVersion,
                     "unsupported container version " + std::to_string(bytes[6]) + "." +
                         std::to_string(bytes[7]),
                     6);
  if (bytes.size() < kPreambleSize)
    throw ParseError(ErrorCode::kTruncated, "missing header length", bytes.size());
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  const std::size_t payload_at = kPreambleSize + header_len;
  if (bytes.size() < payload_at)
    throw ParseError(ErrorCode::kTruncated, "header extends past end of file", bytes.size());

  const std::string_view text(reinterpret_cast<const char *>(bytes.data()) + kPreambleSize,
                              header_len);
  if (header_len == 0 || text.back() != '\n')
    throw ParseError(ErrorCode::kBadHeader, "tensor header must end with a newline",
                     payload_at == 0 ? 0 : payload_at - 1);
  for (std::size_t i = 0; i < text.size(); ++i)
    if (static_cast<unsigned char>(text[i]) > 0x7f)
      throw ParseError(ErrorCode::kBadHeader, "non-ASCII byte in header", kPreambleSize + i);

  std::string descr;
  bool fortran = false;
  std::vector<std::size_t> dims;
  HeaderParser(text, kPreambleSize).parse(descr, fortran, dims);
  const std::size_t descr_at = kPreambleSize + text.find("descr");
  if (descr != "<f4")
    throw ParseError(ErrorCode::kUnsupportedDtype,
                     "unsupported dtype '" + descr + "' (only '<f4')", descr_at);
  if (fortran)
    throw ParseError(ErrorCode::kBadHeader, "fortran-order tensors are not supported",
                     kPreambleSize + text.find("fortran_order"));

  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (count > (std::size_t{1} << 40) / d)
      throw ParseError(ErrorCode::kBadHeader, "tensor shape too large",
                       kPreambleSize + text.find("shape"));
    count *= d;
  }
  const std::size_t expected_end = payload_at + 4 * count;
  if (bytes.size() < expected_end)
    throw ParseError(ErrorCode::kTruncated,
                     "payload truncated: expected " + std::to_string(4 * count) +
                         " bytes, found " + std::to_string(bytes.size() - payload_at),
                     bytes.size());
  if (bytes.size() > expected_end)
    throw ParseError(ErrorCode::kBadHeader,
                     "payload longer than declared shape", expected_end);

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + payload_at + 4 * i, 4);
    data[i] = std::bit_cast<float>(to_little(bits));
    if (!std::isfinite(data[i]))
      throw ParseError(ErrorCode::kNonFinite, "non-finite tensor value", payload_at + 4 * i);
  }
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const Tensor &t, const std::filesystem::path &path) {
  write_file(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path &path) { return decode_tensor(read_file(path)); }

std::string tensor_file_name(std::string_view frame_id, std::string_view quantity) {
  const auto safe = [](std::string_view part) {
    return !part.empty() && part.front() != '.' &&
           std::all_of(part.begin(), part.end(), [](char c) {
             return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                    c == '.';
           });
  };
  if (!safe(frame_id))
    fail(ErrorCode::kInvalidArgument, "invalid frame id '" + std::string(frame_id) + "'");
  if (!safe(quantity))
    fail(ErrorCode::kInvalidArgument, "invalid quantity name '" + std::string(quantity) + "'");
  return std::string(frame_id) + "_" + std::string(quantity) + kTensorExtension;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIo, "read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

}  // namespace io
}  // namespace posebias
