#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posebias/geometry.hpp"
#include "posebias/io.hpp"

namespace posebias::dataset {
struct DatasetManifest;
}

namespace posebias::masking {

using geometry::CameraIntrinsics;
using geometry::PixelPoint;
using geometry::Pose;
using geometry::Vec3;

// Board-frame corners ordered upper-left, upper-right, lower-right, lower-left.
using Quad3 = std::array<Vec3, 4>;
using Quad2 = std::array<PixelPoint, 4>;

struct BoardCorners {
  std::string object_id;
  Quad3 outer;
  std::optional<Quad3> inner;

  // Throws kConfig when a quad is not planar within 1e-6 mm or the inner
  // quad is not strictly inside the outer one.
  void validate() const;
};

enum class MaskGeometry {
  kFrame,       // outer minus inner
  kFilledQuad,  // whole outer quad
};

std::optional<MaskGeometry> parse_geometry(std::string_view name);
std::string_view geometry_name(MaskGeometry g);

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const BinaryMask &) const = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RasterResult {
  BinaryMask mask;
  bool degenerate = false;  // zero-area polygon, mask left empty
};

// Counts of masked frames per pixel. `density(x, y) = count / frames`.
class DensityMap {
 public:
  DensityMap() = default;
  DensityMap(int width, int height);

  void add(const BinaryMask &mask);
  // Associative merge of per-worker accumulators.
  void merge(const DensityMap &other);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint32_t frame_count() const { return frames_; }
  std::uint32_t count(int x, int y) const {
    return counts_[static_cast<std::size_t>(y) * width_ + x];
  }
  double value(int x, int y) const;

  // round(255 * density) grayscale.
  io::ImageBuffer to_image() const;
  // height x width float32.
  Tensor to_tensor() const;

  bool operator==(const DensityMap &) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::uint32_t frames_ = 0;
  std::vector<std::uint32_t> counts_;
};

Quad3 corners_from_offsets(double dx, double dy, double dz);

// Throws geometry::BehindCameraError naming the corner index.
Quad2 project_quad(const Quad3 &corners, const Pose &pose, const CameraIntrinsics &k);

// Pixel (x, y) is set iff its center lies inside or on the polygon. Throws
// kInvalidArgument for non-convex input.
RasterResult rasterize_polygon(const Quad2 &quad, int width, int height);

BinaryMask frame_mask(const BinaryMask &outer, const BinaryMask &inner);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb &) const = default;
};

io::ImageBuffer apply_mask(const io::ImageBuffer &image, const BinaryMask &mask,
                           Rgb fill = {});

DensityMap accumulate_density(std::span<const BinaryMask> masks);

// Mask for one frame under the chosen geometry.
RasterResult board_mask(const BoardCorners &corners, MaskGeometry geometry, const Pose &pose,
                        const CameraIntrinsics &k);

// Corner config (TOML-style): object_id, outer / outer_offsets, optional
// inner / inner_offsets.
BoardCorners load_corners(const std::filesystem::path &path);
BoardCorners parse_corners(std::string_view text, const std::string &source = "<string>");
std::string format_corners(const BoardCorners &corners);

struct SkippedFrame {
  std::string frame_id;
  std::string reason;
};

struct MaskSummary {
  std::size_t frames = 0;
  std::size_t written = 0;
  std::vector<SkippedFrame> skipped;
  std::size_t degenerate = 0;
  std::size_t masked_pixels_min = 0;
  std::size_t masked_pixels_max = 0;
  double masked_pixels_mean = 0.0;
  DensityMap density;
};

struct MaskOptions {
  MaskGeometry geometry = MaskGeometry::kFrame;
  Rgb fill{};
  int jobs = 1;
  bool write_images = true;
};

// Masks every frame of `manifest`, writing `<frame_id>.png` into `out_dir`.
// Unreadable or behind-camera frames are recorded in the summary and skipped.
MaskSummary mask_dataset(const dataset::DatasetManifest &manifest, const BoardCorners &corners,
                         const MaskOptions &options, const std::filesystem::path &out_dir);

}  // namespace posebias::masking
