#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posebias/geometry.hpp"

namespace posebias::metrics {

using geometry::Pose;
using geometry::Vec3;

struct PointCloud {
  std::vector<Vec3> points;
};

struct ModelInfo {
  double diameter = 0.0;  // mm
  bool symmetric = false;
};

enum class MetricKind { kAdd, kAddS };

std::string_view metric_name(MetricKind kind);  // "ADD" / "ADD-S"
std::optional<MetricKind> parse_metric_name(std::string_view name);

struct ErrorRecord {
  std::string frame_id;
  double error = 0.0;  // mm
  MetricKind metric = MetricKind::kAdd;
  bool correct = false;
};

struct AccuracyTable {
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double cross_average = 0.0;
};

inline constexpr double kDefaultKm = 0.1;

// Mean distance between corresponding model points under both poses.
double add_error(const PointCloud &model, const Pose &est, const Pose &gt);

// Mean distance from each estimated-pose point to its closest ground-truth-pose
// point. Uses a kd-tree over the ground-truth cloud.
double adds_error(const PointCloud &model, const Pose &est, const Pose &gt);

// O(N^2) reference for adds_error.
double adds_error_bruteforce(const PointCloud &model, const Pose &est, const Pose &gt);

// e < k_m * diameter (strict).
bool is_correct(double error, const ModelInfo &info, double k_m = kDefaultKm);

MetricKind metric_dispatch(const ModelInfo &info);

double pose_error(MetricKind kind, const PointCloud &model, const Pose &est,
                  const Pose &gt);

// Fraction of correct records. Accumulates integer counts.
double aggregate(std::span<const ErrorRecord> records);

AccuracyTable cross_table(double accuracy_a, double accuracy_b);

// Maximum pairwise distance. Exhaustive up to kDiameterBruteForceLimit points,
// hull-restricted exact search beyond.
inline constexpr std::size_t kDiameterBruteForceLimit = 20000;
double model_diameter(const PointCloud &model);
double model_diameter_bruteforce(const PointCloud &model);
double model_diameter_hull_restricted(const PointCloud &model);

}  // namespace posebias::metrics
