#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "posebias/geometry.hpp"

using namespace posebias;
using namespace posebias::geometry;

namespace {

// Rotation matrix from the unit quaternion (cos(a/2), sin(a/2) * axis).
Mat3 quaternion_oracle(const Vec3 &axis, double angle) {
  const double w = std::cos(angle / 2.0);
  const Vec3 v = std::sin(angle / 2.0) * axis;
  const double x = v.x(), y = v.y(), z = v.z();
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Vec3 random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

CameraIntrinsics test_camera() { return {572.4, 573.6, 325.3, 242.0, 640, 480}; }

}  // namespace

TEST_CASE("axis-angle matches the quaternion construction") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = random_unit(rng);
    const double a = angle(rng);
    const Mat3 r = axis_angle_to_matrix({axis * a});
    CHECK((r - quaternion_oracle(axis, a)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero vector maps to identity and back") {
  CHECK(axis_angle_to_matrix({Vec3::Zero()}) == Mat3::Identity());
  CHECK(matrix_to_axis_angle(Mat3::Identity()).r.norm() == 0.0);
}

TEST_CASE("quarter turn about z") {
  const Mat3 r = axis_angle_to_matrix({Vec3(0, 0, std::numbers::pi / 2)});
  const Vec3 x = r * Vec3::UnitX();
  CHECK(x.x() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(x.y() == doctest::Approx(1.0));
  CHECK(x.z() == doctest::Approx(0.0));
}

TEST_CASE("round trip across the angle range") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 axis = random_unit(rng);
    double a;
    if (i % 5 == 0)
      a = 1e-9 + 1e-6 * u(rng);
    else if (i % 5 == 1)
      a = std::numbers::pi - 1e-7 * (1.0 + u(rng));
    else
      a = std::numbers::pi * u(rng);
    const Vec3 r = axis * a;
    const Mat3 m = axis_angle_to_matrix({r});
    CHECK(orthonormality_residual(m) < 1e-12);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-9);
    const Vec3 back = matrix_to_axis_angle(m).r;
    CHECK((back - r).norm() < 1e-9);
  }
}

TEST_CASE("exact half turn picks a positive leading component") {
  const Vec3 axis = Vec3(-1, 2, 2).normalized();
  const Mat3 m = 2.0 * axis * axis.transpose() - Mat3::Identity();
  const Vec3 r = matrix_to_axis_angle(m).r;
  CHECK(r.norm() == doctest::Approx(std::numbers::pi));
  CHECK(r.x() > 0.0);
  CHECK((r.normalized() + axis).norm() < 1e-9);
  CHECK((axis_angle_to_matrix({r}) - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nearest rotation repairs a perturbed matrix") {
  Mat3 m = axis_angle_to_matrix({Vec3(0.3, -0.2, 0.9)});
  const Mat3 original = m;
  m(0, 1) += 1e-7;
  CHECK_FALSE(is_rotation(m));
  const Mat3 fixed = nearest_rotation(m);
  CHECK(is_rotation(fixed));
  CHECK((fixed - original).cwiseAbs().maxCoeff() < 1e-6);
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  CHECK_FALSE(is_rotation(reflection));
  CHECK(nearest_rotation(reflection).determinant() == doctest::Approx(1.0));
}

TEST_CASE("compose and inverse") {
  Pose a{axis_angle_to_matrix({Vec3(0.1, 0.2, 0.3)}), Vec3(1, 2, 3)};
  Pose b{axis_angle_to_matrix({Vec3(-0.5, 0.0, 1.2)}), Vec3(-4, 0, 9)};
  const Vec3 p(3, -1, 2);
  const Vec3 direct = transform_point(a, transform_point(b, p));
  CHECK((transform_point(compose(a, b), p) - direct).norm() < 1e-12);
  const Pose id = compose(a, inverse(a));
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);
  const Mat4 h = pose_to_homogeneous(a);
  CHECK((h.topLeftCorner<3, 3>() - a.rotation).norm() == 0.0);
  CHECK((h.topRightCorner<3, 1>() - a.translation).norm() == 0.0);
  CHECK(h(3, 3) == 1.0);
  CHECK(h(3, 0) == 0.0);
}

TEST_CASE("projection of the optical axis lands on the principal point") {
  const CameraIntrinsics k = test_camera();
  const PixelPoint p = project(Vec3(0, 0, 500), k);
  CHECK(p.u == k.px);
  CHECK(p.v == k.py);
  const PixelPoint q = project(Vec3(10, -20, 1000), k);
  CHECK(q.u == doctest::Approx(k.px + k.fx * 0.01));
  CHECK(q.v == doctest::Approx(k.py - k.fy * 0.02));
}

TEST_CASE("projection round trip through backproject_center") {
  const CameraIntrinsics k = test_camera();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cx(-100.0, 740.0), cy(-100.0, 580.0), tz(50.0, 3000.0);
  for (int i = 0; i < 300; ++i) {
    const double u = cx(rng), v = cy(rng), z = tz(rng);
    const Vec3 t = backproject_center(u, v, z, k);
    CHECK(t.z() == z);
    const PixelPoint p = project(t, k);
    CHECK(std::abs(p.u - u) < 1e-9);
    CHECK(std::abs(p.v - v) < 1e-9);
  }
}

TEST_CASE("points at or behind the camera are rejected") {
  const CameraIntrinsics k = test_camera();
  CHECK_THROWS_AS(project(Vec3(0, 0, 0), k), BehindCameraError);
  try {
    project(Vec3(1, 2, -3), k);
    FAIL("expected throw");
  } catch (const BehindCameraError &e) {
    CHECK(e.code() == ErrorCode::kBehindCamera);
    CHECK(e.point() == Vec3(1, 2, -3));
    CHECK_FALSE(e.corner_index().has_value());
  }
  CHECK_THROWS_AS(backproject_center(1, 1, 0.0, k), Error);
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(test_camera().validate());
  CameraIntrinsics bad = test_camera();
  bad.fx = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = test_camera();
  bad.width = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
