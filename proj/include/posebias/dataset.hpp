#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posebias/geometry.hpp"
#include "posebias/masking.hpp"

namespace posebias::dataset {

using geometry::CameraIntrinsics;
using geometry::Pose;

inline constexpr int kManifestSchema = 1;
// Annotated rotations within this residual are projected back onto SO(3);
// anything larger is rejected.
inline constexpr double kRotationRepairTolerance = 1e-6;

struct Frame {
  std::string frame_id;
  std::filesystem::path image;  // absolute after load
  Pose gt;

  bool operator==(const Frame &o) const {
    return frame_id == o.frame_id && image == o.image && gt.rotation == o.gt.rotation &&
           gt.translation == o.gt.translation;
  }
};

struct ModelReference {
  std::filesystem::path path;       // absolute after load
  std::optional<double> diameter;  // mm; authoritative when present
  bool symmetric = false;

  bool operator==(const ModelReference &) const = default;
};

struct DatasetManifest {
  std::string object_id;
  std::string units = "mm";
  CameraIntrinsics intrinsics;
  ModelReference model;
  std::vector<Frame> frames;

  bool operator==(const DatasetManifest &o) const {
    return object_id == o.object_id && units == o.units &&
           intrinsics.fx == o.intrinsics.fx && intrinsics.fy == o.intrinsics.fy &&
           intrinsics.px == o.intrinsics.px && intrinsics.py == o.intrinsics.py &&
           intrinsics.width == o.intrinsics.width && intrinsics.height == o.intrinsics.height &&
           model == o.model && frames == o.frames;
  }
};

struct LoadedManifest {
  DatasetManifest manifest;
  // Largest orthonormality residual seen before repair.
  double max_rotation_residual = 0.0;
  std::size_t repaired_rotations = 0;
};

// Validates schema, units, rotations and frame-id uniqueness. Relative paths
// resolve against the manifest's directory.
LoadedManifest load_manifest(const std::filesystem::path &path);
LoadedManifest parse_manifest(const std::string &json_text, const std::filesystem::path &base_dir);

// Writes paths relative to the manifest's directory when possible.
std::string format_manifest(const DatasetManifest &manifest,
                            const std::filesystem::path &base_dir);
void write_manifest(const DatasetManifest &manifest, const std::filesystem::path &path);

// Frame ids become output file names, so they are restricted to
// [A-Za-z0-9._-] and may not start with '.'.
bool valid_frame_id(const std::string &id);

// Sidecar `export.json` written next to exported tensors:
//   {"schema": 1, "taps": [three layer names],
//    "scalarization": "per_component" | "scalarized", "frames": [ids]}
// Per-component exports carry grad_rx1..3, grad_ry1..3 and grad_rz1..3;
// scalarized exports carry grad1..3.
inline constexpr const char *kExportMetadataFile = "export.json";

enum class Scalarization { kPerComponent, kScalarized };

struct ExportMetadata {
  std::vector<std::string> taps;
  Scalarization scalarization = Scalarization::kPerComponent;
  std::vector<std::string> frames;

  bool operator==(const ExportMetadata &) const = default;
};

// Quantity names used in `{frame}_{quantity}.f32t`.
namespace quantity {
inline constexpr const char *kInputGrad = "input_grad";
inline constexpr const char *kCandidates = "candidates";
inline constexpr const char *kConfidences = "confidences";
inline constexpr const char *kActivations = "activations";
inline constexpr const char *kScoreGrad = "score_grad";
// "feat" -> feat1..feat3, "grad" -> grad1..grad3, "grad_rx" -> grad_rx1..
std::string layer(std::string_view prefix, int index);
}  // namespace quantity

// Throws kExportMetadata for schema violations.
ExportMetadata parse_export_metadata(const std::string &json_text);
ExportMetadata load_export_metadata(const std::filesystem::path &path);
std::string format_export_metadata(const ExportMetadata &meta);

struct SyntheticSceneSpec {
  std::string object_id = "synthetic";
  int frame_count = 20;
  CameraIntrinsics intrinsics{500.0, 500.0, 319.5, 239.5, 640, 480};
  masking::BoardCorners board;
  double distance_min = 600.0;   // mm
  double distance_max = 900.0;   // mm
  double cone_half_angle = 0.6;  // rad, board tilt
  double center_jitter = 0.05;   // fraction of image size
  std::uint64_t seed = 7;

  void validate() const;
};

// Default board: 120 x 90 mm outer, 80 x 55 mm inner opening, in z = 0.
masking::BoardCorners default_synthetic_board();

// Spec file (TOML-style): frame_count, width, height, fx, fy, px, py,
// distance_min, distance_max, cone_half_angle, center_jitter, seed, object_id,
// plus the corner keys accepted by masking::parse_corners.
SyntheticSceneSpec load_synthetic_spec(const std::filesystem::path &path);

// Writes rgb/<id>.png, model.ply, corners.toml and manifest.json under
// out_dir. Output bytes depend only on the spec.
DatasetManifest generate_synthetic(const SyntheticSceneSpec &spec,
                                   const std::filesystem::path &out_dir);

// Poses the generator would produce for `spec`.
std::vector<Pose> sample_synthetic_poses(const SyntheticSceneSpec &spec);

// Border (outer minus inner) region known to the renderer, found by
// intersecting each pixel-center ray with the board plane.
masking::BinaryMask rendered_border_region(const masking::BoardCorners &board, const Pose &pose,
                                           const CameraIntrinsics &k);

}  // namespace posebias::dataset
