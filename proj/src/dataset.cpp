#include "posebias/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <set>
#include <sstream>

#include "posebias/io.hpp"

namespace posebias::dataset {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string &what) {
  fail(ErrorCode::kManifestSchema, "manifest: " + what);
}

const json &field(const json &obj, const char *key, const std::string &where) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + " is missing '" + key + "'");
  return *it;
}

double number(const json &obj, const char *key, const std::string &where) {
  const json &v = field(obj, key, where);
  if (!v.is_number()) schema_error(where + "." + key + " must be a number");
  return v.get<double>();
}

int integer(const json &obj, const char *key, const std::string &where) {
  const json &v = field(obj, key, where);
  if (!v.is_number_integer()) schema_error(where + "." + key + " must be an integer");
  return v.get<int>();
}

std::string string(const json &obj, const char *key, const std::string &where) {
  const json &v = field(obj, key, where);
  if (!v.is_string()) schema_error(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json &v, std::size_t n, const std::string &where) {
  if (!v.is_array() || v.size() != n)
    schema_error(where + " must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const json &e : v) {
    if (!e.is_number()) schema_error(where + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string relative_to(const std::filesystem::path &p, const std::filesystem::path &base) {
  if (base.empty()) return p.generic_string();
  const auto rel = p.lexically_relative(base.lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

}  // namespace

bool valid_frame_id(const std::string &id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

LoadedManifest parse_manifest(const std::string &json_text, const std::filesystem::path &base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error &e) {
    std::string msg = e.what();
    throw ParseError(ErrorCode::kManifestSchema, "manifest is not valid JSON: " + msg, e.byte);
  }
  if (!root.is_object()) schema_error("top level must be an object");
  const json &schema = field(root, "schema", "manifest");
  if (!schema.is_number_integer() || schema.get<int>() != kManifestSchema)
    schema_error("unsupported schema version (expected " + std::to_string(kManifestSchema) + ")");

  LoadedManifest loaded;
  DatasetManifest &m = loaded.manifest;
  m.object_id = string(root, "object_id", "manifest");
  m.units = string(root, "units", "manifest");
  if (m.units != "mm")
    fail(ErrorCode::kManifestUnits, "manifest: units must be \"mm\", got \"" + m.units + "\"");

  const json &k = field(root, "intrinsics", "manifest");
  if (!k.is_object()) schema_error("intrinsics must be an object");
  m.intrinsics = {number(k, "fx", "intrinsics"), number(k, "fy", "intrinsics"),
                  number(k, "px", "intrinsics"), number(k, "py", "intrinsics"),
                  integer(k, "width", "intrinsics"), integer(k, "height", "intrinsics")};
  try {
    m.intrinsics.validate();
  } catch (const Error &e) {
    schema_error(std::string("intrinsics: ") + e.what());
  }

  const json &model = field(root, "model", "manifest");
  if (!model.is_object()) schema_error("model must be an object");
  m.model.path = resolve(base_dir, string(model, "path", "model"));
  if (model.contains("diameter_mm")) {
    const double d = number(model, "diameter_mm", "model");
    if (!(d > 0.0)) schema_error("model.diameter_mm must be positive");
    m.model.diameter = d;
  }
  const json &sym = field(model, "symmetric", "model");
  if (!sym.is_boolean()) schema_error("model.symmetric must be a boolean");
  m.model.symmetric = sym.get<bool>();

  const json &frames = field(root, "frames", "manifest");
  if (!frames.is_array()) schema_error("frames must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json &f = frames[i];
    const std::string where = "frames[" + std::to_string(i) + "]";
    if (!f.is_object()) schema_error(where + " must be an object");
    Frame frame;
    frame.frame_id = string(f, "frame_id", where);
    if (!valid_frame_id(frame.frame_id))
      schema_error(where + ".frame_id '" + frame.frame_id + "' has characters outside [A-Za-z0-9._-]");
    if (!seen.insert(frame.frame_id).second)
      fail(ErrorCode::kManifestDuplicateFrame,
           "manifest: duplicate frame id '" + frame.frame_id + "'");
    frame.image = resolve(base_dir, string(f, "image", where));

    const bool has_matrix = f.contains("rotation");
    const bool has_axis_angle = f.contains("axis_angle");
    if (has_matrix == has_axis_angle)
      schema_error(where + " needs exactly one of 'rotation' or 'axis_angle'");
    if (has_matrix) {
      const auto r = numbers(f["rotation"], 9, where + ".rotation");
      geometry::Mat3 rot;
      rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
      if (!rot.allFinite())
        fail(ErrorCode::kManifestRotation, "manifest: " + where + ".rotation is not finite");
      const double residual = geometry::orthonormality_residual(rot);
      const double det_err = std::abs(rot.determinant() - 1.0);
      const double worst = std::max(residual, det_err);
      loaded.max_rotation_residual = std::max(loaded.max_rotation_residual, worst);
      if (worst > kRotationRepairTolerance)
        fail(ErrorCode::kManifestRotation,
             "manifest: " + where + ".rotation is not a rotation (residual " +
                 std::to_string(worst) + ")");
      if (!geometry::is_rotation(rot)) {
        rot = geometry::nearest_rotation(rot);
        ++loaded.repaired_rotations;
      }
      frame.gt.rotation = rot;
    } else {
      const auto r = numbers(f["axis_angle"], 3, where + ".axis_angle");
      try {
        frame.gt.rotation = geometry::axis_angle_to_matrix({geometry::Vec3(r[0], r[1], r[2])});
      } catch (const Error &e) {
        fail(ErrorCode::kManifestRotation, "manifest: " + where + ".axis_angle: " + e.what());
      }
    }
    const auto t = numbers(field(f, "translation", where), 3, where + ".translation");
    frame.gt.translation = geometry::Vec3(t[0], t[1], t[2]);
    if (!frame.gt.translation.allFinite()) schema_error(where + ".translation is not finite");
    m.frames.push_back(std::move(frame));
  }
  return loaded;
}

LoadedManifest load_manifest(const std::filesystem::path &path) {
  const auto bytes = io::read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()),
                        std::filesystem::absolute(path).parent_path());
}

std::string format_manifest(const DatasetManifest &m, const std::filesystem::path &base_dir) {
  json root;
  root["schema"] = kManifestSchema;
  root["object_id"] = m.object_id;
  root["units"] = m.units;
  root["intrinsics"] = {{"fx", m.intrinsics.fx},       {"fy", m.intrinsics.fy},
                        {"px", m.intrinsics.px},       {"py", m.intrinsics.py},
                        {"width", m.intrinsics.width}, {"height", m.intrinsics.height}};
  json model = {{"path", relative_to(m.model.path, base_dir)}, {"symmetric", m.model.symmetric}};
  if (m.model.diameter) model["diameter_mm"] = *m.model.diameter;
  root["model"] = model;
  json frames = json::array();
  for (const Frame &f : m.frames) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(f.gt.rotation(r, c));
    frames.push_back({{"frame_id", f.frame_id},
                      {"image", relative_to(f.image, base_dir)},
                      {"rotation", rot},
                      {"translation",
                       {f.gt.translation.x(), f.gt.translation.y(), f.gt.translation.z()}}});
  }
  root["frames"] = frames;
  return root.dump(2) + "\n";
}

void write_manifest(const DatasetManifest &manifest, const std::filesystem::path &path) {
  const auto base = std::filesystem::absolute(path).parent_path();
  io::write_text_file(path, format_manifest(manifest, base));
}

namespace quantity {

std::string layer(std::string_view prefix, int index) {
  if (index < 1 || index > 3) fail(ErrorCode::kInvalidArgument, "layer index must be 1, 2 or 3");
  return std::string(prefix) + std::to_string(index);
}

}  // namespace quantity

ExportMetadata parse_export_metadata(const std::string &json_text) {
  const auto bad = [](const std::string &msg) -> void { fail(ErrorCode::kExportMetadata, msg); };
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error &e) {
    fail(ErrorCode::kExportMetadata, std::string("export metadata: ") + e.what());
  }
  if (!j.is_object()) bad("export metadata must be a JSON object");
  if (!j.contains("schema") || j["schema"] != kManifestSchema)
    bad("export metadata: unsupported schema");

  ExportMetadata meta;
  if (!j.contains("taps") || !j["taps"].is_array() || j["taps"].size() != 3)
    bad("export metadata: 'taps' must list exactly three layer names");
  for (const auto &t : j["taps"]) {
    if (!t.is_string() || t.get<std::string>().empty())
      bad("export metadata: tap names must be non-empty strings");
    meta.taps.push_back(t.get<std::string>());
  }

  if (!j.contains("scalarization") || !j["scalarization"].is_string())
    bad("export metadata: missing 'scalarization'");
  const std::string mode = j["scalarization"];
  if (mode == "per_component")
    meta.scalarization = Scalarization::kPerComponent;
  else if (mode == "scalarized")
    meta.scalarization = Scalarization::kScalarized;
  else
    bad("export metadata: scalarization must be 'per_component' or 'scalarized'");

  if (!j.contains("frames") || !j["frames"].is_array())
    bad("export metadata: 'frames' must be an array");
  std::set<std::string> seen;
  for (const auto &f : j["frames"]) {
    if (!f.is_string() || !valid_frame_id(f.get<std::string>()))
      bad("export metadata: invalid frame id " + f.dump());
    if (!seen.insert(f.get<std::string>()).second)
      bad("export metadata: duplicate frame id " + f.dump());
    meta.frames.push_back(f.get<std::string>());
  }
  return meta;
}

ExportMetadata load_export_metadata(const std::filesystem::path &path) {
  const auto bytes = io::read_file(path);
  return parse_export_metadata(std::string(bytes.begin(), bytes.end()));
}

std::string format_export_metadata(const ExportMetadata &meta) {
  json j;
  j["schema"] = kManifestSchema;
  j["taps"] = meta.taps;
  j["scalarization"] =
      meta.scalarization == Scalarization::kPerComponent ? "per_component" : "scalarized";
  j["frames"] = meta.frames;
  return j.dump(2) + "\n";
}

}  // namespace posebias::dataset
