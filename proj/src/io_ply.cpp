#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>
#include <string>
#include <string_view>

#include "posebias/io.hpp"

namespace posebias::io {

namespace {

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUint8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUint16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUint32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUint8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

// Reads one little-endian scalar as double.
double load_scalar(const std::uint8_t *p, ScalarType t) {
  std::uint8_t buf[8];
  const std::size_t n = scalar_size(t);
  std::memcpy(buf, p, n);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + n);
  switch (t) {
    case ScalarType::kInt8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
    case ScalarType::kUint8: return buf[0];
    case ScalarType::kInt16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::kUint16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::kInt32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::kUint32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::kFloat32: { float v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::kFloat64: { double v; std::memcpy(&v, buf, 8); return v; }
  }
  return 0.0;
}

struct Header {
  PlyFormat format = PlyFormat::kAscii;
  std::vector<Element> elements;
  std::optional<double> declared_diameter;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;
};

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Header parse_header(std::span<const std::uint8_t> bytes) {
  Header h;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_format = false;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= bytes.size()) return std::nullopt;
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(reinterpret_cast<const char *>(bytes.data()) + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end < bytes.size() ? end + 1 : end;
    ++line_no;
    return line;
  };
  auto error = [&](ErrorCode code, const std::string &what) {
    throw ParseError(code, "ply header line " + std::to_string(line_no) + ": " + what, pos);
  };

  const auto first = next_line();
  if (!first || *first != "ply") throw ParseError(ErrorCode::kPlyFormat, "missing 'ply' magic", 0);

  while (true) {
    const auto line = next_line();
    if (!line) error(ErrorCode::kPlyFormat, "unexpected end of file before end_header");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment") {
      if (tok.size() >= 3 && tok[1] == "diameter") {
        double d = 0.0;
        const auto [end, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), d);
        if (ec != std::errc{} || end != tok[2].data() + tok[2].size() || !(d > 0.0))
          error(ErrorCode::kPlyFormat, "invalid diameter comment");
        h.declared_diameter = d;
      }
      continue;
    }
    if (tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[2] != "1.0") error(ErrorCode::kPlyFormat, "unsupported format line");
      if (tok[1] == "ascii") {
        h.format = PlyFormat::kAscii;
      } else if (tok[1] == "binary_little_endian") {
        h.format = PlyFormat::kBinaryLittleEndian;
      } else {
        error(ErrorCode::kPlyFormat, "unsupported format '" + tok[1] + "'");
      }
      have_format = true;
      continue;
    }
    if (tok[0] == "element") {
      if (tok.size() != 3) error(ErrorCode::kPlyFormat, "malformed element line");
      std::size_t count = 0;
      const auto [end, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc{} || end != tok[2].data() + tok[2].size())
        error(ErrorCode::kPlyFormat, "invalid element count");
      h.elements.push_back({tok[1], count, {}});
      continue;
    }
    if (tok[0] == "property") {
      if (h.elements.empty()) error(ErrorCode::kPlyFormat, "property before any element");
      Property prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = scalar_type(tok[2]);
        const auto it = scalar_type(tok[3]);
        if (!ct || !it) error(ErrorCode::kPlyFormat, "unknown list property type");
        prop = {tok[4], *it, true, *ct};
      } else if (tok.size() == 3) {
        const auto t = scalar_type(tok[1]);
        if (!t) error(ErrorCode::kPlyFormat, "unknown property type '" + tok[1] + "'");
        prop = {tok[2], *t, false, ScalarType::kUint8};
      } else {
        error(ErrorCode::kPlyFormat, "malformed property line");
      }
      h.elements.back().properties.push_back(prop);
      continue;
    }
    error(ErrorCode::kPlyFormat, "unknown header keyword '" + tok[0] + "'");
  }
  if (!have_format) error(ErrorCode::kPlyFormat, "missing format line");
  h.body_offset = pos;
  h.body_line = line_no;
  return h;
}

struct VertexLayout {
  std::size_t element = 0;
  int x = -1, y = -1, z = -1;
};

VertexLayout locate_vertices(const Header &h) {
  VertexLayout layout;
  bool found = false;
  for (std::size_t e = 0; e < h.elements.size(); ++e) {
    if (h.elements[e].name != "vertex") continue;
    layout.element = e;
    found = true;
    const auto &props = h.elements[e].properties;
    for (std::size_t p = 0; p < props.size(); ++p) {
      int *slot = props[p].name == "x"   ? &layout.x
                  : props[p].name == "y" ? &layout.y
                  : props[p].name == "z" ? &layout.z
                                         : nullptr;
      if (!slot) continue;
      if (props[p].is_list ||
          (props[p].type != ScalarType::kFloat32 && props[p].type != ScalarType::kFloat64))
        throw ParseError(ErrorCode::kPlyFormat,
                         "vertex property '" + props[p].name + "' must be float or double",
                         h.body_offset);
      *slot = static_cast<int>(p);
    }
    break;
  }
  if (!found)
    throw ParseError(ErrorCode::kPlyMissingProperty, "no vertex element", h.body_offset);
  if (layout.x < 0 || layout.y < 0 || layout.z < 0)
    throw ParseError(ErrorCode::kPlyMissingProperty, "vertex element lacks x/y/z properties",
                     h.body_offset);
  if (h.elements[layout.element].count == 0)
    throw ParseError(ErrorCode::kPlyCountMismatch, "vertex element is empty", h.body_offset);
  return layout;
}

void store_vertex(MeshFile &mesh, const double (&xyz)[3], std::size_t at) {
  if (!std::isfinite(xyz[0]) || !std::isfinite(xyz[1]) || !std::isfinite(xyz[2]))
    throw ParseError(ErrorCode::kNonFinite, "non-finite vertex coordinate", at);
  mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
}

MeshFile decode_ascii(std::span<const std::uint8_t> bytes, const Header &h,
                      const VertexLayout &layout) {
  MeshFile mesh{{}, h.declared_diameter};
  std::size_t pos = h.body_offset;
  std::size_t line = h.body_line;
  // Token stream over the body; tracks line numbers for diagnostics.
  auto next_token = [&]() -> std::optional<std::string_view> {
    while (pos < bytes.size() && std::isspace(bytes[pos])) {
      if (bytes[pos] == '\n') ++line;
      ++pos;
    }
    if (pos >= bytes.size()) return std::nullopt;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    return std::string_view(reinterpret_cast<const char *>(bytes.data()) + start, pos - start);
  };
  auto number = [&](const Element &el, std::size_t index) -> double {
    const auto tok = next_token();
    if (!tok)
      throw ParseError(ErrorCode::kPlyCountMismatch,
                       "element '" + el.name + "' declares " + std::to_string(el.count) +
                           " entries but body ends after " + std::to_string(index) +
                           " (line " + std::to_string(line + 1) + ")",
                       pos);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(tok->data(), tok->data() + tok->size(), v);
    if (ec != std::errc{} || end != tok->data() + tok->size())
      throw ParseError(ErrorCode::kPlyFormat,
                       "invalid number '" + std::string(*tok) + "' on line " +
                           std::to_string(line + 1),
                       pos - tok->size());
    return v;
  };

  for (std::size_t e = 0; e <= layout.element; ++e) {
    const Element &el = h.elements[e];
    for (std::size_t i = 0; i < el.count; ++i) {
      double xyz[3] = {0, 0, 0};
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const Property &prop = el.properties[p];
        if (prop.is_list) {
          const double n = number(el, i);
          if (n < 0 || n != std::floor(n))
            throw ParseError(ErrorCode::kPlyFormat, "invalid list length", pos);
          for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) number(el, i);
          continue;
        }
        const double v = number(el, i);
        if (e == layout.element) {
          if (static_cast<int>(p) == layout.x) xyz[0] = v;
          if (static_cast<int>(p) == layout.y) xyz[1] = v;
          if (static_cast<int>(p) == layout.z) xyz[2] = v;
        }
      }
      if (e == layout.element) store_vertex(mesh, xyz, pos);
    }
  }
  return mesh;
}

MeshFile decode_binary(std::span<const std::uint8_t> bytes, const Header &h,
                       const VertexLayout &layout) {
  MeshFile mesh{{}, h.declared_diameter};
  std::size_t pos = h.body_offset;
  auto take = [&](const Element &el, std::size_t index, std::size_t n) {
    if (bytes.size() - pos < n)
      throw ParseError(ErrorCode::kPlyCountMismatch,
                       "element '" + el.name + "' declares " + std::to_string(el.count) +
                           " entries but body ends inside entry " + std::to_string(index),
                       bytes.size());
    const std::uint8_t *p = bytes.data() + pos;
    pos += n;
    return p;
  };

  for (std::size_t e = 0; e <= layout.element; ++e) {
    const Element &el = h.elements[e];
    for (std::size_t i = 0; i < el.count; ++i) {
      double xyz[3] = {0, 0, 0};
      const std::size_t entry_at = pos;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const Property &prop = el.properties[p];
        if (prop.is_list) {
          const double n = load_scalar(take(el, i, scalar_size(prop.count_type)), prop.count_type);
          if (n < 0) throw ParseError(ErrorCode::kPlyFormat, "negative list length", pos);
          take(el, i, static_cast<std::size_t>(n) * scalar_size(prop.type));
          continue;
        }
        const double v = load_scalar(take(el, i, scalar_size(prop.type)), prop.type);
        if (e == layout.element) {
          if (static_cast<int>(p) == layout.x) xyz[0] = v;
          if (static_cast<int>(p) == layout.y) xyz[1] = v;
          if (static_cast<int>(p) == layout.z) xyz[2] = v;
        }
      }
      if (e == layout.element) store_vertex(mesh, xyz, entry_at);
    }
  }
  return mesh;
}

}  // namespace

MeshFile decode_ply(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes);
  const VertexLayout layout = locate_vertices(h);
  return h.format == PlyFormat::kAscii ? decode_ascii(bytes, h, layout)
                                       : decode_binary(bytes, h, layout);
}

MeshFile read_ply(const std::filesystem::path &path) { return decode_ply(read_file(path)); }

std::vector<std::uint8_t> encode_ply(const MeshFile &mesh, PlyFormat format) {
  std::ostringstream header;
  header << "ply\n"
         << "format " << (format == PlyFormat::kAscii ? "ascii" : "binary_little_endian")
         << " 1.0\n";
  if (mesh.declared_diameter) {
    header.precision(17);
    header << "comment diameter " << *mesh.declared_diameter << "\n";
  }
  header << "element vertex " << mesh.vertices.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n"
         << "end_header\n";
  std::string text = header.str();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  if (format == PlyFormat::kAscii) {
    std::ostringstream body;
    body.precision(17);
    for (const auto &v : mesh.vertices) body << v.x() << " " << v.y() << " " << v.z() << "\n";
    const std::string b = body.str();
    out.insert(out.end(), b.begin(), b.end());
  } else {
    for (const auto &v : mesh.vertices) {
      for (int i = 0; i < 3; ++i) {
        std::uint8_t buf[8];
        const double d = v[i];
        std::memcpy(buf, &d, 8);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 8);
        out.insert(out.end(), buf, buf + 8);
      }
    }
  }
  return out;
}

void write_ply(const MeshFile &mesh, PlyFormat format, const std::filesystem::path &path) {
  write_file(path, encode_ply(mesh, format));
}

}  // namespace posebias::io
