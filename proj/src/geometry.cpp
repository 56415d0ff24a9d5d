#include "posebias/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace posebias::geometry {

namespace {

bool finite(const Vec3 &v) { return v.allFinite(); }

std::string format_point(const Vec3 &p) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << p.x() << ", " << p.y() << ", " << p.z() << ")";
  return os.str();
}

Mat3 skew(const Vec3 &k) {
  Mat3 s;
  s << 0.0, -k.z(), k.y(),  //
      k.z(), 0.0, -k.x(),   //
      -k.y(), k.x(), 0.0;
  return s;
}

// Flips `axis` so its first nonzero component is positive.
Vec3 canonical_sign(Vec3 axis) {
  for (int i = 0; i < 3; ++i) {
    if (axis[i] > 0.0) return axis;
    if (axis[i] < 0.0) return -axis;
  }
  return axis;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(std::isfinite(fx) && fx > 0.0 && std::isfinite(fy) && fy > 0.0))
    fail(ErrorCode::kInvalidArgument, "camera focal lengths must be positive");
  if (!(std::isfinite(px) && std::isfinite(py)))
    fail(ErrorCode::kInvalidArgument, "camera principal point must be finite");
  if (width < 1 || height < 1)
    fail(ErrorCode::kInvalidArgument, "camera image size must be at least 1x1");
}

BehindCameraError::BehindCameraError(const Vec3 &point,
                                     std::optional<int> corner_index)
    : Error(ErrorCode::kBehindCamera,
            (corner_index ? "corner " + std::to_string(*corner_index) + " "
                          : std::string{}) +
                "point " + format_point(point) + " is behind the camera"),
      point_{point},
      corner_index_{corner_index} {}

double orthonormality_residual(const Mat3 &m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

bool is_rotation(const Mat3 &m, double tol) {
  if (!m.allFinite()) return false;
  return orthonormality_residual(m) <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Mat3 nearest_rotation(const Mat3 &m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 axis_angle_to_matrix(const AxisAngle &aa) {
  if (!finite(aa.r))
    fail(ErrorCode::kInvalidArgument, "axis-angle vector must be finite");
  const double angle = aa.r.norm();
  if (angle < 1e-12) return Mat3::Identity();
  const Mat3 k = skew(aa.r / angle);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

AxisAngle matrix_to_axis_angle(const Mat3 &m) {
  if (!is_rotation(m))
    fail(ErrorCode::kInvalidArgument, "matrix is not a rotation");

  // sin(angle) * axis
  const Vec3 v{0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)),
               0.5 * (m(1, 0) - m(0, 1))};
  const double s = v.norm();
  const double c = std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(s, c);

  if (angle < 1e-12) return {Vec3::Zero()};

  if (c > -0.5) {
    // Far from pi the antisymmetric part is well conditioned.
    return {v * (angle / s)};
  }

  // Near pi: axis from the symmetric part, S = c I + (1 - c) k k^T.
  const Mat3 kk = (0.5 * (m + m.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  int col = 0;
  kk.diagonal().maxCoeff(&col);
  Vec3 axis = kk.col(col) / std::sqrt(kk(col, col));
  axis.normalize();
  const double side = axis.dot(v);
  if (side < 0.0) {
    axis = -axis;
  } else if (side == 0.0) {
    axis = canonical_sign(axis);
  }
  return {axis * angle};
}

Vec3 transform_point(const Pose &pose, const Vec3 &p) {
  return pose.rotation * p + pose.translation;
}

Pose compose(const Pose &a, const Pose &b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose &pose) {
  const Mat3 rt = pose.rotation.transpose();
  return {rt, -(rt * pose.translation)};
}

Mat4 pose_to_homogeneous(const Pose &pose) {
  Mat4 h = Mat4::Identity();
  h.topLeftCorner<3, 3>() = pose.rotation;
  h.topRightCorner<3, 1>() = pose.translation;
  return h;
}

PixelPoint project(const Vec3 &p_cam, const CameraIntrinsics &k) {
  if (!(p_cam.z() > 0.0)) throw BehindCameraError(p_cam, std::nullopt);
  return {k.fx * p_cam.x() / p_cam.z() + k.px, k.fy * p_cam.y() / p_cam.z() + k.py};
}

Vec3 backproject_center(double cx, double cy, double tz,
                        const CameraIntrinsics &k) {
  if (!(std::isfinite(tz) && tz > 0.0))
    fail(ErrorCode::kInvalidArgument, "depth must be positive");
  return {(cx - k.px) * tz / k.fx, (cy - k.py) * tz / k.fy, tz};
}

}  // namespace posebias::geometry
