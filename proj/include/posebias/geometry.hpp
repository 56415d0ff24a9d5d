#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <array>
#include <optional>

#include "posebias/error.hpp"

namespace posebias::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Rotation vector: direction is the axis, norm is the angle in radians.
struct AxisAngle {
  Vec3 r = Vec3::Zero();
};

// Rigid transform object -> camera. Translation in millimetres.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double px = 0.0;
  double py = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument when focal lengths or image size are invalid.
  void validate() const;
};

// Image-plane location. Origin top-left, u right, v down, pixel centers at
// integer coordinates.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

class BehindCameraError : public Error {
 public:
  BehindCameraError(const Vec3 &point, std::optional<int> corner_index);

  const Vec3 &point() const noexcept { return point_; }
  std::optional<int> corner_index() const noexcept { return corner_index_; }

 private:
  Vec3 point_;
  std::optional<int> corner_index_;
};

inline constexpr double kRotationTolerance = 1e-9;

// Max-abs entry of R^T R - I.
double orthonormality_residual(const Mat3 &m);

// True when `m` is orthonormal within `tol` and det(m) is within `tol` of 1.
bool is_rotation(const Mat3 &m, double tol = kRotationTolerance);

// Closest rotation in the Frobenius sense (SVD projection).
Mat3 nearest_rotation(const Mat3 &m);

Mat3 axis_angle_to_matrix(const AxisAngle &aa);

// Angle in [0, pi]. At exactly pi the axis sign is chosen so that the first
// nonzero component is positive.
AxisAngle matrix_to_axis_angle(const Mat3 &m);

Vec3 transform_point(const Pose &pose, const Vec3 &p);

// a after b.
Pose compose(const Pose &a, const Pose &b);

Pose inverse(const Pose &pose);

Mat4 pose_to_homogeneous(const Pose &pose);

// Pinhole projection of a camera-frame point. Throws BehindCameraError when
// z <= 0. Results may fall outside the image.
PixelPoint project(const Vec3 &p_cam, const CameraIntrinsics &k);

// Recovers the translation whose projection is (cx, cy) at depth tz.
Vec3 backproject_center(double cx, double cy, double tz,
                        const CameraIntrinsics &k);

}  // namespace posebias::geometry
