#include "posebias/masking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "posebias/config.hpp"
#include "posebias/dataset.hpp"
#include "posebias/parallel.hpp"

namespace posebias::masking {

namespace {

constexpr double kPlanarityTolerance = 1e-6;  // mm

double cross2(const PixelPoint &a, const PixelPoint &b, double px, double py) {
  return (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u);
}

// Plane basis spanned by a quad: origin, two in-plane unit axes, normal.
struct PlaneFrame {
  Vec3 origin;
  Vec3 e1;
  Vec3 e2;
  Vec3 normal;
};

PlaneFrame plane_of(const Quad3 &q) {
  Vec3 normal = Vec3::Zero();
  for (int i = 0; i < 4; ++i) normal += q[i].cross(q[(i + 1) % 4]);  // Newell
  const double len = normal.norm();
  if (!(len > 0.0)) fail(ErrorCode::kConfig, "board quad has zero area");
  normal /= len;
  Vec3 origin = (q[0] + q[1] + q[2] + q[3]) / 4.0;
  Vec3 e1 = q[1] - q[0];
  e1 = (e1 - e1.dot(normal) * normal).normalized();
  return {origin, e1, normal.cross(e1), normal};
}

std::array<PixelPoint, 4> in_plane(const PlaneFrame &f, const Quad3 &q) {
  std::array<PixelPoint, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = {(q[i] - f.origin).dot(f.e1), (q[i] - f.origin).dot(f.e2)};
  return out;
}

std::string format_vec(const Vec3 &v) {
  std::ostringstream os;
  os << std::setprecision(17) << "[" << v.x() << ", " << v.y() << ", " << v.z() << "]";
  return os.str();
}

Quad3 quad_from_rows(const std::vector<std::vector<double>> &rows, const std::string &key,
                     const std::string &source) {
  if (rows.size() != 4)
    fail(ErrorCode::kConfig, source + ": '" + key + "' must list exactly 4 corners");
  Quad3 q;
  for (int i = 0; i < 4; ++i) {
    if (rows[i].size() != 3)
      fail(ErrorCode::kConfig, source + ": '" + key + "' corners must have 3 coordinates");
    q[i] = Vec3(rows[i][0], rows[i][1], rows[i][2]);
    if (!q[i].allFinite()) fail(ErrorCode::kConfig, source + ": non-finite corner in '" + key + "'");
  }
  return q;
}

Quad3 quad_from_offsets(const std::vector<double> &off, const std::string &key,
                        const std::string &source) {
  if (off.size() != 3)
    fail(ErrorCode::kConfig, source + ": '" + key + "' must be [dx, dy, dz]");
  try {
    return corners_from_offsets(off[0], off[1], off[2]);
  } catch (const Error &e) {
    fail(ErrorCode::kConfig, source + ": '" + key + "': " + e.what());
  }
}

}  // namespace

// --- BoardCorners -----------------------------------------------------------

void BoardCorners::validate() const {
  const auto planar = [](const Quad3 &q, const PlaneFrame &f) {
    double worst = 0.0;
    for (const Vec3 &p : q) worst = std::max(worst, std::abs((p - f.origin).dot(f.normal)));
    return worst;
  };
  const PlaneFrame f = plane_of(outer);
  if (planar(outer, f) > kPlanarityTolerance)
    fail(ErrorCode::kConfig, "outer board corners are not coplanar");
  if (!inner) return;
  if (planar(*inner, f) > kPlanarityTolerance)
    fail(ErrorCode::kConfig, "inner board corners do not lie in the outer board plane");

  const auto o = in_plane(f, outer);
  const auto in = in_plane(f, *inner);
  double area = 0.0;
  for (int i = 0; i < 4; ++i) area += o[i].u * o[(i + 1) % 4].v - o[(i + 1) % 4].u * o[i].v;
  const double sign = area > 0.0 ? 1.0 : -1.0;
  for (const PixelPoint &p : in) {
    for (int i = 0; i < 4; ++i) {
      if (!(sign * cross2(o[i], o[(i + 1) % 4], p.u, p.v) > 0.0))
        fail(ErrorCode::kConfig, "inner board quad is not strictly inside the outer quad");
    }
  }
}

std::optional<MaskGeometry> parse_geometry(std::string_view name) {
  if (name == "frame") return MaskGeometry::kFrame;
  if (name == "filled") return MaskGeometry::kFilledQuad;
  return std::nullopt;
}

std::string_view geometry_name(MaskGeometry g) {
  return g == MaskGeometry::kFrame ? "frame" : "filled";
}

// --- BinaryMask / DensityMap ------------------------------------------------

BinaryMask::BinaryMask(int width, int height) : width_{width}, height_{height} {
  if (width < 1 || height < 1)
    fail(ErrorCode::kInvalidArgument, "mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

DensityMap::DensityMap(int width, int height) : width_{width}, height_{height} {
  if (width < 1 || height < 1)
    fail(ErrorCode::kInvalidArgument, "density dimensions must be positive");
  counts_.assign(static_cast<std::size_t>(width) * height, 0);
}

void DensityMap::add(const BinaryMask &mask) {
  if (mask.width() != width_ || mask.height() != height_)
    fail(ErrorCode::kShapeMismatch, "mask dimensions differ from density map");
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += bits[i];
  ++frames_;
}

void DensityMap::merge(const DensityMap &other) {
  if (other.frames_ == 0 && other.counts_.empty()) return;
  if (counts_.empty() && frames_ == 0) {
    *this = other;
    return;
  }
  if (other.width_ != width_ || other.height_ != height_)
    fail(ErrorCode::kShapeMismatch, "cannot merge density maps of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  frames_ += other.frames_;
}

double DensityMap::value(int x, int y) const {
  if (frames_ == 0) return 0.0;
  return static_cast<double>(count(x, y)) / static_cast<double>(frames_);
}

io::ImageBuffer DensityMap::to_image() const {
  auto img = io::ImageBuffer::filled(width_, height_, 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      // Integer rounding of 255 * count / frames, half away from zero.
      const std::uint64_t num = 255ull * count(x, y);
      const std::uint64_t den = std::max<std::uint32_t>(frames_, 1);
      img.pixel(x, y)[0] = static_cast<std::uint8_t>((2 * num + den) / (2 * den));
    }
  }
  return img;
}

Tensor DensityMap::to_tensor() const {
  std::vector<float> data(counts_.size());
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      data[static_cast<std::size_t>(y) * width_ + x] = static_cast<float>(value(x, y));
  return Tensor({static_cast<std::size_t>(height_), static_cast<std::size_t>(width_)},
                std::move(data));
}

// --- geometry of the occluder -----------------------------------------------

Quad3 corners_from_offsets(double dx, double dy, double dz) {
  if (!(std::isfinite(dx) && dx > 0.0 && std::isfinite(dy) && dy > 0.0))
    fail(ErrorCode::kInvalidArgument, "corner offsets dx and dy must be positive");
  if (!std::isfinite(dz)) fail(ErrorCode::kInvalidArgument, "corner offset dz must be finite");
  return {Vec3(-dx, -dy, dz), Vec3(dx, -dy, dz), Vec3(dx, dy, dz), Vec3(-dx, dy, dz)};
}

Quad2 project_quad(const Quad3 &corners, const Pose &pose, const CameraIntrinsics &k) {
  Quad2 out;
  for (int i = 0; i < 4; ++i) {
    const Vec3 cam = geometry::transform_point(pose, corners[i]);
    if (!(cam.z() > 0.0)) throw geometry::BehindCameraError(cam, i);
    out[i] = geometry::project(cam, k);
  }
  return out;
}

RasterResult rasterize_polygon(const Quad2 &quad, int width, int height) {
  RasterResult result{BinaryMask(width, height), false};
  for (const PixelPoint &p : quad)
    if (!(std::isfinite(p.u) && std::isfinite(p.v)))
      fail(ErrorCode::kInvalidArgument, "polygon vertex is not finite");

  bool pos_turn = false;
  bool neg_turn = false;
  double twice_area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const PixelPoint &a = quad[i];
    const PixelPoint &b = quad[(i + 1) % 4];
    const PixelPoint &c = quad[(i + 2) % 4];
    const double turn = cross2(a, b, c.u, c.v);
    pos_turn = pos_turn || turn > 0.0;
    neg_turn = neg_turn || turn < 0.0;
    twice_area += a.u * b.v - b.u * a.v;
  }
  if (pos_turn && neg_turn) fail(ErrorCode::kInvalidArgument, "polygon is not convex");
  if (twice_area == 0.0) {
    result.degenerate = true;
    return result;
  }
  const double orient = twice_area > 0.0 ? 1.0 : -1.0;

  double umin = quad[0].u, umax = quad[0].u, vmin = quad[0].v, vmax = quad[0].v;
  for (const PixelPoint &p : quad) {
    umin = std::min(umin, p.u);
    umax = std::max(umax, p.u);
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
  const double x0 = std::max(0.0, std::ceil(umin));
  const double x1 = std::min(static_cast<double>(width - 1), std::floor(umax));
  const double y0 = std::max(0.0, std::ceil(vmin));
  const double y1 = std::min(static_cast<double>(height - 1), std::floor(vmax));
  if (x0 > x1 || y0 > y1) return result;

  for (int y = static_cast<int>(y0); y <= static_cast<int>(y1); ++y) {
    for (int x = static_cast<int>(x0); x <= static_cast<int>(x1); ++x) {
      bool inside = true;
      for (int i = 0; i < 4 && inside; ++i)
        inside = orient * cross2(quad[i], quad[(i + 1) % 4], x, y) >= 0.0;
      if (inside) result.mask.set(x, y);
    }
  }
  return result;
}

BinaryMask frame_mask(const BinaryMask &outer, const BinaryMask &inner) {
  if (outer.width() != inner.width() || outer.height() != inner.height())
    fail(ErrorCode::kShapeMismatch, "frame_mask: outer and inner masks differ in size");
  BinaryMask out(outer.width(), outer.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(x, y, outer.at(x, y) && !inner.at(x, y));
  return out;
}

io::ImageBuffer apply_mask(const io::ImageBuffer &image, const BinaryMask &mask, Rgb fill) {
  if (image.channels != 3) fail(ErrorCode::kInvalidArgument, "apply_mask expects an RGB image");
  if (image.width != mask.width() || image.height != mask.height())
    fail(ErrorCode::kShapeMismatch, "image and mask dimensions differ");
  io::ImageBuffer out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (!mask.at(x, y)) continue;
      std::uint8_t *px = out.pixel(x, y);
      px[0] = fill.r;
      px[1] = fill.g;
      px[2] = fill.b;
    }
  }
  return out;
}

DensityMap accumulate_density(std::span<const BinaryMask> masks) {
  if (masks.empty()) fail(ErrorCode::kInvalidArgument, "density needs at least one mask");
  DensityMap density(masks.front().width(), masks.front().height());
  for (const BinaryMask &m : masks) density.add(m);
  return density;
}

RasterResult board_mask(const BoardCorners &corners, MaskGeometry geometry, const Pose &pose,
                        const CameraIntrinsics &k) {
  RasterResult outer =
      rasterize_polygon(project_quad(corners.outer, pose, k), k.width, k.height);
  if (geometry == MaskGeometry::kFilledQuad) return outer;
  if (!corners.inner)
    fail(ErrorCode::kConfig, "frame geometry requires inner corners for object '" +
                                 corners.object_id + "'");
  const RasterResult inner =
      rasterize_polygon(project_quad(*corners.inner, pose, k), k.width, k.height);
  return {frame_mask(outer.mask, inner.mask), outer.degenerate};
}

// --- corner config ----------------------------------------------------------

BoardCorners parse_corners(std::string_view text, const std::string &source) {
  const auto doc = config::Document::parse(text, source);
  BoardCorners c;
  c.object_id = doc.string("object_id");
  if (doc.contains("outer") == doc.contains("outer_offsets"))
    fail(ErrorCode::kConfig, source + ": exactly one of 'outer' or 'outer_offsets' is required");
  c.outer = doc.contains("outer") ? quad_from_rows(doc.number_rows("outer"), "outer", source)
                                  : quad_from_offsets(doc.numbers("outer_offsets"),
                                                      "outer_offsets", source);
  if (doc.contains("inner") && doc.contains("inner_offsets"))
    fail(ErrorCode::kConfig, source + ": 'inner' and 'inner_offsets' are mutually exclusive");
  if (doc.contains("inner"))
    c.inner = quad_from_rows(doc.number_rows("inner"), "inner", source);
  if (doc.contains("inner_offsets"))
    c.inner = quad_from_offsets(doc.numbers("inner_offsets"), "inner_offsets", source);
  c.validate();
  return c;
}

BoardCorners load_corners(const std::filesystem::path &path) {
  const auto bytes = io::read_file(path);
  return parse_corners(std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()),
                       path.string());
}

std::string format_corners(const BoardCorners &corners) {
  std::ostringstream os;
  const auto quad = [&](const char *key, const Quad3 &q) {
    os << key << " = [";
    for (int i = 0; i < 4; ++i) os << (i ? ", " : "") << format_vec(q[i]);
    os << "]\n";
  };
  os << "object_id = \"" << corners.object_id << "\"\n";
  quad("outer", corners.outer);
  if (corners.inner) quad("inner", *corners.inner);
  return os.str();
}

// --- dataset run ------------------------------------------------------------

MaskSummary mask_dataset(const dataset::DatasetManifest &manifest, const BoardCorners &corners,
                         const MaskOptions &options, const std::filesystem::path &out_dir) {
  if (manifest.frames.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no frames");
  if (options.geometry == MaskGeometry::kFrame && !corners.inner)
    fail(ErrorCode::kConfig, "frame geometry requires inner corners for object '" +
                                 corners.object_id + "'");
  const CameraIntrinsics &k = manifest.intrinsics;
  k.validate();
  if (options.write_images) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create output directory " + out_dir.string());
  }

  struct FrameOutcome {
    bool ok = false;
    bool degenerate = false;
    std::size_t masked = 0;
    std::string reason;
  };
  const std::size_t n = manifest.frames.size();
  std::vector<FrameOutcome> outcomes(n);
  std::vector<DensityMap> partial(chunk_count(n, options.jobs));

  parallel_chunks(n, options.jobs, [&](std::size_t worker, std::size_t begin, std::size_t end) {
    DensityMap local(k.width, k.height);
    for (std::size_t i = begin; i < end; ++i) {
      const dataset::Frame &frame = manifest.frames[i];
      FrameOutcome &out = outcomes[i];
      io::ImageBuffer image;
      try {
        image = io::read_png(frame.image);
      } catch (const Error &e) {
        out.reason = std::string("unreadable image: ") + e.what();
        continue;
      }
      if (image.channels != 3 || image.width != k.width || image.height != k.height) {
        out.reason = "image is not " + std::to_string(k.width) + "x" +
                     std::to_string(k.height) + " RGB";
        continue;
      }
      RasterResult raster;
      try {
        raster = board_mask(corners, options.geometry, frame.gt, k);
      } catch (const geometry::BehindCameraError &e) {
        out.reason = e.what();
        continue;
      }
      if (options.write_images) {
        io::write_png(apply_mask(image, raster.mask, options.fill),
                      out_dir / (frame.frame_id + ".png"));
      }
      local.add(raster.mask);
      out.ok = true;
      out.degenerate = raster.degenerate;
      out.masked = raster.mask.count();
    }
    partial[worker] = std::move(local);
  });

  MaskSummary summary;
  summary.frames = n;
  summary.masked_pixels_min = std::numeric_limits<std::size_t>::max();
  std::uint64_t masked_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FrameOutcome &o = outcomes[i];
    if (!o.ok) {
      summary.skipped.push_back({manifest.frames[i].frame_id, o.reason});
      continue;
    }
    ++summary.written;
    summary.degenerate += o.degenerate ? 1 : 0;
    summary.masked_pixels_min = std::min(summary.masked_pixels_min, o.masked);
    summary.masked_pixels_max = std::max(summary.masked_pixels_max, o.masked);
    masked_total += o.masked;
  }
  if (summary.written == 0) {
    summary.masked_pixels_min = 0;
  } else {
    summary.masked_pixels_mean =
        static_cast<double>(masked_total) / static_cast<double>(summary.written);
  }
  for (const DensityMap &d : partial) summary.density.merge(d);
  return summary;
}

}  // namespace posebias::masking
