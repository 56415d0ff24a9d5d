#include <cmath>
#include <cstdio>
#include <random>

#include "posebias/config.hpp"
#include "posebias/dataset.hpp"
#include "posebias/io.hpp"
#include "posebias/metrics.hpp"

namespace posebias::dataset {

namespace {

using geometry::Mat3;
using geometry::Vec3;

// Uniform [0, 1) from the raw 64-bit stream; mt19937_64's sequence is fixed by
// the standard, std::uniform_real_distribution's mapping is not.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_{seed} {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

struct BoardPlane {
  Vec3 origin;
  Vec3 e1;
  Vec3 e2;
  Vec3 normal;
  std::array<geometry::PixelPoint, 4> outer;
  std::optional<std::array<geometry::PixelPoint, 4>> inner;
};

std::array<geometry::PixelPoint, 4> flatten(const masking::Quad3 &q, const Vec3 &o,
                                             const Vec3 &e1, const Vec3 &e2) {
  std::array<geometry::PixelPoint, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = {(q[i] - o).dot(e1), (q[i] - o).dot(e2)};
  return out;
}

BoardPlane board_plane(const masking::BoardCorners &board) {
  const auto &q = board.outer;
  Vec3 n = Vec3::Zero();
  for (int i = 0; i < 4; ++i) n += q[i].cross(q[(i + 1) % 4]);
  n.normalize();
  const Vec3 o = (q[0] + q[1] + q[2] + q[3]) / 4.0;
  Vec3 e1 = q[1] - q[0];
  e1 = (e1 - e1.dot(n) * n).normalized();
  const Vec3 e2 = n.cross(e1);
  BoardPlane plane{o, e1, e2, n, flatten(q, o, e1, e2), std::nullopt};
  if (board.inner) plane.inner = flatten(*board.inner, o, e1, e2);
  return plane;
}

bool inside(const std::array<geometry::PixelPoint, 4> &poly, double a, double b) {
  double area = 0.0;
  for (int i = 0; i < 4; ++i)
    area += poly[i].u * poly[(i + 1) % 4].v - poly[(i + 1) % 4].u * poly[i].v;
  const double s = area > 0.0 ? 1.0 : -1.0;
  for (int i = 0; i < 4; ++i) {
    const auto &p = poly[i];
    const auto &q = poly[(i + 1) % 4];
    if (s * ((q.u - p.u) * (b - p.v) - (q.v - p.v) * (a - p.u)) < 0.0) return false;
  }
  return true;
}

// Board-plane coordinates hit by the ray through pixel center (x, y).
std::optional<std::pair<double, double>> hit_board(const BoardPlane &plane, const Pose &pose,
                                                   const CameraIntrinsics &k, int x, int y) {
  const Mat3 rt = pose.rotation.transpose();
  const Vec3 origin = -(rt * pose.translation);  // camera center, object frame
  const Vec3 dir = rt * Vec3((x - k.px) / k.fx, (y - k.py) / k.fy, 1.0);
  const double denom = dir.dot(plane.normal);
  if (denom == 0.0) return std::nullopt;
  const double s = (plane.origin - origin).dot(plane.normal) / denom;
  if (!(s > 0.0)) return std::nullopt;
  const Vec3 hit = origin + s * dir - plane.origin;
  return std::make_pair(hit.dot(plane.e1), hit.dot(plane.e2));
}

Mat3 rotation_about(const Vec3 &axis, double angle) {
  return geometry::axis_angle_to_matrix({axis.normalized() * angle});
}

// Cube of points standing on the board center, used as the object model.
io::MeshFile stand_in_model() {
  io::MeshFile mesh;
  const int n = 5;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        mesh.vertices.emplace_back(-20.0 + 10.0 * i, -20.0 + 10.0 * j, 10.0 * l);
  return mesh;
}

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

}  // namespace

masking::BoardCorners default_synthetic_board() {
  masking::BoardCorners board;
  board.object_id = "synthetic";
  board.outer = masking::corners_from_offsets(60.0, 45.0, 0.0);
  board.inner = masking::corners_from_offsets(40.0, 27.5, 0.0);
  return board;
}

void SyntheticSceneSpec::validate() const {
  if (frame_count < 1) fail(ErrorCode::kInvalidArgument, "synthetic frame_count must be >= 1");
  intrinsics.validate();
  if (!(distance_min > 0.0 && distance_max >= distance_min))
    fail(ErrorCode::kInvalidArgument, "synthetic distance range must satisfy 0 < min <= max");
  if (!(cone_half_angle >= 0.0 && cone_half_angle < M_PI / 2))
    fail(ErrorCode::kInvalidArgument, "synthetic cone_half_angle must lie in [0, pi/2)");
  if (!(center_jitter >= 0.0 && center_jitter <= 0.5))
    fail(ErrorCode::kInvalidArgument, "synthetic center_jitter must lie in [0, 0.5]");
  if (!board.inner)
    fail(ErrorCode::kInvalidArgument, "synthetic board needs inner corners");
  board.validate();
}

SyntheticSceneSpec load_synthetic_spec(const std::filesystem::path &path) {
  const auto bytes = io::read_file(path);
  const std::string text(bytes.begin(), bytes.end());
  const auto doc = config::Document::parse(text, path.string());
  SyntheticSceneSpec spec;
  const auto as_int = [&](const char *key, int fallback) {
    const double v = doc.number_or(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      fail(ErrorCode::kConfig, path.string() + ": '" + key + "' must be an integer");
    return static_cast<int>(v);
  };
  spec.frame_count = as_int("frame_count", spec.frame_count);
  spec.intrinsics.width = as_int("width", spec.intrinsics.width);
  spec.intrinsics.height = as_int("height", spec.intrinsics.height);
  spec.intrinsics.fx = doc.number_or("fx", spec.intrinsics.fx);
  spec.intrinsics.fy = doc.number_or("fy", spec.intrinsics.fy);
  spec.intrinsics.px = doc.number_or("px", (spec.intrinsics.width - 1) / 2.0);
  spec.intrinsics.py = doc.number_or("py", (spec.intrinsics.height - 1) / 2.0);
  spec.distance_min = doc.number_or("distance_min", spec.distance_min);
  spec.distance_max = doc.number_or("distance_max", spec.distance_max);
  spec.cone_half_angle = doc.number_or("cone_half_angle", spec.cone_half_angle);
  spec.center_jitter = doc.number_or("center_jitter", spec.center_jitter);
  const double seed = doc.number_or("seed", static_cast<double>(spec.seed));
  if (seed < 0 || seed != std::floor(seed) || seed > 9007199254740992.0)
    fail(ErrorCode::kConfig, path.string() + ": 'seed' must be a non-negative integer");
  spec.seed = static_cast<std::uint64_t>(seed);
  if (doc.contains("object_id")) spec.object_id = doc.string("object_id");
  if (doc.contains("outer") || doc.contains("outer_offsets")) {
    spec.board = masking::parse_corners(text, path.string());
  } else {
    spec.board = default_synthetic_board();
    spec.board.object_id = spec.object_id;
  }
  spec.validate();
  return spec;
}

std::vector<Pose> sample_synthetic_poses(const SyntheticSceneSpec &spec) {
  spec.validate();
  Sampler rng(spec.seed);
  std::vector<Pose> poses;
  const CameraIntrinsics &k = spec.intrinsics;
  for (int i = 0; i < spec.frame_count; ++i) {
    const double spin = rng.uniform(-M_PI, M_PI);
    const double tilt_dir = rng.uniform(0.0, 2.0 * M_PI);
    const double tilt = spec.cone_half_angle * rng.uniform();
    const double tz = rng.uniform(spec.distance_min, spec.distance_max);
    const double cx = k.px + spec.center_jitter * k.width * rng.uniform(-1.0, 1.0);
    const double cy = k.py + spec.center_jitter * k.height * rng.uniform(-1.0, 1.0);
    Mat3 r = rotation_about(Vec3::UnitZ(), spin);
    if (tilt > 0.0) r = rotation_about(Vec3(std::cos(tilt_dir), std::sin(tilt_dir), 0.0), tilt) * r;
    poses.push_back({r, geometry::backproject_center(cx, cy, tz, k)});
  }
  return poses;
}

masking::BinaryMask rendered_border_region(const masking::BoardCorners &board, const Pose &pose,
                                           const CameraIntrinsics &k) {
  const BoardPlane plane = board_plane(board);
  masking::BinaryMask mask(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const auto hit = hit_board(plane, pose, k, x, y);
      if (!hit) continue;
      const bool in_outer = inside(plane.outer, hit->first, hit->second);
      const bool in_inner = plane.inner && inside(*plane.inner, hit->first, hit->second);
      if (in_outer && !in_inner) mask.set(x, y);
    }
  }
  return mask;
}

DatasetManifest generate_synthetic(const SyntheticSceneSpec &spec,
                                   const std::filesystem::path &out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "rgb", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + (out_dir / "rgb").string() + ": " + ec.message());
  const auto root = std::filesystem::absolute(out_dir).lexically_normal();

  const CameraIntrinsics &k = spec.intrinsics;
  const BoardPlane plane = board_plane(spec.board);
  const std::vector<Pose> poses = sample_synthetic_poses(spec);
  // Independent stream for pixel noise so pose sampling is unaffected by image size.
  Sampler noise(spec.seed ^ 0x9e3779b97f4a7c15ull);
  constexpr double kCell = 12.0;  // mm, border checker size

  DatasetManifest manifest;
  manifest.object_id = spec.object_id;
  manifest.intrinsics = k;
  const io::MeshFile model = stand_in_model();
  manifest.model.path = root / "model.ply";
  manifest.model.symmetric = false;
  manifest.model.diameter =
      metrics::model_diameter(metrics::PointCloud{model.vertices});

  for (int i = 0; i < spec.frame_count; ++i) {
    const Pose &pose = poses[i];
    auto img = io::ImageBuffer::filled(k.width, k.height, 3);
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        std::uint8_t *px = img.pixel(x, y);
        const std::uint64_t bits = noise.bits();
        const int grain = static_cast<int>(bits & 0x1f) - 16;
        const int base = 96 + (40 * y) / k.height;
        px[0] = static_cast<std::uint8_t>(base + grain);
        px[1] = static_cast<std::uint8_t>(base + 8 + grain);
        px[2] = static_cast<std::uint8_t>(base + 16 + grain);

        const auto hit = hit_board(plane, pose, k, x, y);
        if (!hit || !inside(plane.outer, hit->first, hit->second)) continue;
        if (plane.inner && inside(*plane.inner, hit->first, hit->second)) {
          px[0] = 170;  // plain work area where the object sits
          px[1] = 140;
          px[2] = 100;
          continue;
        }
        const long cu = static_cast<long>(std::floor(hit->first / kCell));
        const long cv = static_cast<long>(std::floor(hit->second / kCell));
        const std::uint8_t shade = ((cu + cv) & 1) ? 235 : 20;
        px[0] = px[1] = px[2] = shade;
      }
    }
    Frame frame;
    frame.frame_id = frame_name(i);
    frame.image = root / "rgb" / (frame.frame_id + ".png");
    frame.gt = pose;
    io::write_png(img, frame.image);
    manifest.frames.push_back(std::move(frame));
  }

  io::write_ply(model, io::PlyFormat::kAscii, root / "model.ply");
  io::write_text_file(root / "corners.toml", masking::format_corners(spec.board));
  write_manifest(manifest, root / "manifest.json");
  return manifest;
}

}  // namespace posebias::dataset
