#pragma once

#include <chrono>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "posebias/geometry.hpp"
#include "posebias/metrics.hpp"

namespace testsupport {

using posebias::geometry::Pose;
using posebias::geometry::Vec3;

inline Vec3 random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline posebias::metrics::PointCloud random_cloud(std::mt19937_64 &rng, std::size_t n,
                                                  double half_extent = 50.0) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  posebias::metrics::PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cloud.points.emplace_back(u(rng), u(rng), u(rng));
  return cloud;
}

inline Pose random_pose(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> xy(-200.0, 200.0), z(300.0, 1500.0);
  Pose p;
  p.rotation = posebias::geometry::axis_angle_to_matrix({random_unit(rng) * angle(rng)});
  p.translation = Vec3(xy(rng), xy(rng), z(rng));
  return p;
}

// Small perturbation of `base`, so the estimate is near the ground truth.
inline Pose perturbed(std::mt19937_64 &rng, const Pose &base, double angle, double shift) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose p = base;
  p.rotation =
      posebias::geometry::axis_angle_to_matrix({random_unit(rng) * (angle * u(rng))}) *
      base.rotation;
  p.translation += Vec3(u(rng), u(rng), u(rng)) * shift;
  return p;
}

template <typename F>
double seconds(F &&f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("posebias_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
