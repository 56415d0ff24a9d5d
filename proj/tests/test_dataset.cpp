#include <doctest.h>

#include <fstream>
#include <json.hpp>

#include "posebias/dataset.hpp"
#include "posebias/io.hpp"
#include "support.hpp"

using namespace posebias;
using namespace posebias::dataset;
using nlohmann::json;
using posebias::geometry::Vec3;

namespace {

json base_manifest() {
  return json::parse(R"({
    "schema": 1,
    "object_id": "ape",
    "units": "mm",
    "intrinsics": {"fx": 572.4114, "fy": 573.57043, "px": 325.2611, "py": 242.04899,
                   "width": 640, "height": 480},
    "model": {"path": "models/obj_01.ply", "diameter_mm": 102.099, "symmetric": false},
    "frames": [
      {"frame_id": "0000", "image": "rgb/0000.png",
       "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [10, -20, 800]},
      {"frame_id": "0001", "image": "/data/rgb/0001.png",
       "axis_angle": [0, 0, 1.5707963267948966], "translation": [0, 0, 500]}
    ]
  })");
}

ErrorCode code_of(const json &j) {
  try {
    parse_manifest(j.dump(), "/base");
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("manifest unexpectedly accepted");
  return ErrorCode::kInvalidArgument;
}

double iou(const masking::BinaryMask &a, const masking::BinaryMask &b) {
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      inter += a.at(x, y) && b.at(x, y);
      uni += a.at(x, y) || b.at(x, y);
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path &p) { return io::read_file(p); }

}  // namespace

TEST_CASE("manifest fields and path resolution") {
  const LoadedManifest loaded = parse_manifest(base_manifest().dump(), "/base/split");
  const DatasetManifest &m = loaded.manifest;
  CHECK(m.object_id == "ape");
  CHECK(m.intrinsics.fx == 572.4114);
  CHECK(m.intrinsics.height == 480);
  CHECK(m.model.path == std::filesystem::path("/base/split/models/obj_01.ply"));
  CHECK(m.model.diameter == 102.099);
  REQUIRE(m.frames.size() == 2);
  CHECK(m.frames[0].image == std::filesystem::path("/base/split/rgb/0000.png"));
  CHECK(m.frames[1].image == std::filesystem::path("/data/rgb/0001.png"));
  CHECK(m.frames[0].gt.translation == Vec3(10, -20, 800));
  CHECK((m.frames[1].gt.rotation * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);
  CHECK(loaded.repaired_rotations == 0);
}

TEST_CASE("manifest without a diameter") {
  json j = base_manifest();
  j["model"].erase("diameter_mm");
  CHECK_FALSE(parse_manifest(j.dump(), "/").manifest.model.diameter.has_value());
}

TEST_CASE("units must be millimetres") {
  json j = base_manifest();
  j["units"] = "m";
  CHECK(code_of(j) == ErrorCode::kManifestUnits);
}

TEST_CASE("duplicate frame ids are rejected") {
  json j = base_manifest();
  j["frames"][1]["frame_id"] = "0000";
  CHECK(code_of(j) == ErrorCode::kManifestDuplicateFrame);
}

TEST_CASE("frame ids are safe file names") {
  CHECK(valid_frame_id("000123"));
  CHECK(valid_frame_id("seq-2_frame.7"));
  CHECK_FALSE(valid_frame_id(""));
  CHECK_FALSE(valid_frame_id(".hidden"));
  CHECK_FALSE(valid_frame_id("../escape"));
  CHECK_FALSE(valid_frame_id("a b"));
  json j = base_manifest();
  j["frames"][0]["frame_id"] = "dir/file";
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
}

TEST_CASE("small rotation residuals are repaired, large ones rejected") {
  json j = base_manifest();
  j["frames"][0]["rotation"] = {1, 5e-7, 0, 0, 1, 0, 0, 0, 1};
  const LoadedManifest fixed = parse_manifest(j.dump(), "/");
  CHECK(fixed.repaired_rotations == 1);
  CHECK(fixed.max_rotation_residual == doctest::Approx(5e-7));
  CHECK(geometry::is_rotation(fixed.manifest.frames[0].gt.rotation));

  j["frames"][0]["rotation"] = {1, 2e-6, 0, 0, 1, 0, 0, 0, 1};
  CHECK(code_of(j) == ErrorCode::kManifestRotation);
  j["frames"][0]["rotation"] = {1, 0, 0, 0, 1, 0, 0, 0, -1};
  CHECK(code_of(j) == ErrorCode::kManifestRotation);
}

TEST_CASE("schema violations") {
  json j = base_manifest();
  j["schema"] = 2;
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  j = base_manifest();
  j["frames"][0].erase("translation");
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  j = base_manifest();
  j["frames"][0]["axis_angle"] = {0, 0, 0};
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  j = base_manifest();
  j["intrinsics"]["width"] = 640.5;
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  j = base_manifest();
  j["model"]["symmetric"] = "no";
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  j = base_manifest();
  j["frames"][0]["translation"] = {1, 2};
  CHECK(code_of(j) == ErrorCode::kManifestSchema);
  try {
    parse_manifest("{\"schema\": 1,", "/");
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.code() == ErrorCode::kManifestSchema);
  }
}

TEST_CASE("manifest round trip through a file") {
  testsupport::TempDir dir("manifest");
  std::filesystem::create_directories(dir.path() / "split");
  const auto path = dir.path() / "split" / "manifest.json";
  {
    std::ofstream(path) << base_manifest().dump();
  }
  const DatasetManifest first = load_manifest(path).manifest;
  write_manifest(first, path);
  const DatasetManifest second = load_manifest(path).manifest;
  CHECK(second == first);
  const json written = json::parse(std::ifstream(path));
  CHECK(written["model"]["path"] == "models/obj_01.ply");
  CHECK(written["frames"][1]["image"] == "/data/rgb/0001.png");
  CHECK(written["frames"][1].contains("rotation"));
  CHECK_THROWS_AS(load_manifest(dir.path() / "nope.json"), Error);
}

TEST_CASE("synthetic poses keep the board in front of the camera") {
  SyntheticSceneSpec spec;
  spec.board = default_synthetic_board();
  const auto poses = sample_synthetic_poses(spec);
  REQUIRE(poses.size() == 20);
  for (const Pose &p : poses) {
    CHECK(geometry::is_rotation(p.rotation));
    CHECK(p.translation.z() >= spec.distance_min);
    CHECK(p.translation.z() <= spec.distance_max);
    const Vec3 normal = p.rotation * Vec3::UnitZ();
    CHECK(std::acos(std::abs(normal.z())) <= spec.cone_half_angle + 1e-12);
  }
  CHECK(sample_synthetic_poses(spec)[7].translation == poses[7].translation);
  spec.seed = 8;
  CHECK(sample_synthetic_poses(spec)[0].translation != poses[0].translation);
}

TEST_CASE("synthetic generation is deterministic and self-consistent") {
  SyntheticSceneSpec spec;
  spec.board = default_synthetic_board();
  testsupport::TempDir a("synth_a"), b("synth_b");
  const DatasetManifest ma = generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  REQUIRE(ma.frames.size() == 20);
  for (const char *name : {"manifest.json", "model.ply", "corners.toml", "rgb/0000.png",
                           "rgb/0013.png", "rgb/0019.png"})
    CHECK(slurp(a / name) == slurp(b / name));

  const LoadedManifest loaded = load_manifest(a / "manifest.json");
  CHECK(loaded.repaired_rotations == 0);
  CHECK(loaded.manifest.frames[3].gt.rotation == ma.frames[3].gt.rotation);
  CHECK(loaded.manifest.model.diameter.has_value());
  const io::MeshFile model = io::read_ply(a / "model.ply");
  CHECK(model.vertices.size() == 125);
  const masking::BoardCorners corners = masking::load_corners(a / "corners.toml");
  CHECK(corners.outer == spec.board.outer);
  CHECK(corners.inner == spec.board.inner);

  for (const Frame &f : ma.frames) {
    const io::ImageBuffer img = io::read_png(f.image);
    CHECK(img.width == 640);
    CHECK(img.channels == 3);
    const auto known = rendered_border_region(spec.board, f.gt, spec.intrinsics);
    const auto raster =
        masking::board_mask(spec.board, masking::MaskGeometry::kFrame, f.gt, spec.intrinsics);
    CHECK(iou(known, raster.mask) > 0.99);
    // The board lies wholly inside the image.
    for (const Vec3 &c : spec.board.outer) {
      const auto p = geometry::project(geometry::transform_point(f.gt, c), spec.intrinsics);
      CHECK(p.u >= 0.0);
      CHECK(p.u <= 639.0);
      CHECK(p.v >= 0.0);
      CHECK(p.v <= 479.0);
    }
  }
}

TEST_CASE("synthetic spec file") {
  testsupport::TempDir dir("spec");
  io::write_text_file(dir / "scene.toml", R"(
object_id = "bench"
frame_count = 3
width = 320
height = 240
fx = 300
fy = 300
seed = 99
distance_min = 500
distance_max = 700
)");
  const SyntheticSceneSpec spec = load_synthetic_spec(dir / "scene.toml");
  CHECK(spec.frame_count == 3);
  CHECK(spec.intrinsics.px == 159.5);
  CHECK(spec.seed == 99);
  CHECK(spec.board.object_id == "bench");
  CHECK(spec.board.inner.has_value());

  io::write_text_file(dir / "bad.toml", "frame_count = 2.5\n");
  CHECK_THROWS_AS(load_synthetic_spec(dir / "bad.toml"), Error);
  io::write_text_file(dir / "bad2.toml", "cone_half_angle = 2.0\n");
  CHECK_THROWS_AS(load_synthetic_spec(dir / "bad2.toml"), Error);
}

TEST_CASE("export metadata") {
  const ExportMetadata meta{{"a", "b", "c"}, Scalarization::kScalarized, {"0000", "0001"}};
  CHECK(parse_export_metadata(format_export_metadata(meta)) == meta);
  const json good = json::parse(format_export_metadata(meta));
  CHECK(good["scalarization"] == "scalarized");

  const auto code = [](const json &j) {
    try {
      parse_export_metadata(j.dump());
    } catch (const Error &e) {
      return e.code();
    }
    FAIL("export metadata unexpectedly accepted");
    return ErrorCode::kInvalidArgument;
  };
  json j = good;
  j["taps"] = {"a", "b"};
  CHECK(code(j) == ErrorCode::kExportMetadata);
  j = good;
  j["scalarization"] = "sum";
  CHECK(code(j) == ErrorCode::kExportMetadata);
  j = good;
  j["frames"] = {"0000", "0000"};
  CHECK(code(j) == ErrorCode::kExportMetadata);
  j = good;
  j["frames"] = {"../x"};
  CHECK(code(j) == ErrorCode::kExportMetadata);
  j = good;
  j.erase("schema");
  CHECK(code(j) == ErrorCode::kExportMetadata);
  CHECK_THROWS_AS(parse_export_metadata("[1,"), Error);

  CHECK(quantity::layer("grad_rx", 2) == "grad_rx2");
  CHECK_THROWS_AS(quantity::layer("feat", 4), Error);
}
