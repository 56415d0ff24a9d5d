#include "posebias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "posebias/kdtree.hpp"

namespace posebias::metrics {

namespace {

void require_nonempty(const PointCloud &model) {
  if (model.points.empty())
    fail(ErrorCode::kInvalidArgument, "model point cloud is empty");
}

std::vector<Vec3> transformed(const PointCloud &model, const Pose &pose) {
  std::vector<Vec3> out;
  out.reserve(model.points.size());
  for (const Vec3 &p : model.points) out.push_back(geometry::transform_point(pose, p));
  return out;
}

// Unit directions spread over the sphere (golden-angle spiral).
std::vector<Vec3> probe_directions(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(count);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(1.0 - z * z);
    dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return dirs;
}

struct Plane {
  Vec3 normal;  // unit, outward
  double offset = 0.0;
};

// Supporting planes of the convex hull of `pts` by exhaustive triple search.
// Only used on a few dozen extreme points.
std::vector<Plane> hull_planes(const std::vector<Vec3> &pts, double tol) {
  std::vector<Plane> planes;
  const std::size_t n = pts.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        Vec3 normal = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        const double len = normal.norm();
        if (!(len > tol)) continue;
        normal /= len;
        const double offset = normal.dot(pts[a]);
        bool below = true;
        bool above = true;
        for (const Vec3 &p : pts) {
          const double s = normal.dot(p) - offset;
          below = below && s <= tol;
          above = above && s >= -tol;
          if (!below && !above) break;
        }
        if (below) planes.push_back({normal, offset});
        if (above) planes.push_back({-normal, -offset});
      }
    }
  }
  return planes;
}

double max_pair_distance(std::vector<Vec3> pts) {
  // Sort by distance from the centroid; |p - q| <= |p - c| + |q - c| bounds
  // the remaining pairs and lets both loops stop early.
  Vec3 centroid = Vec3::Zero();
  for (const Vec3 &p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  std::vector<std::pair<double, Vec3>> ranked;
  ranked.reserve(pts.size());
  for (const Vec3 &p : pts) ranked.emplace_back((p - centroid).norm(), p);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto &x, const auto &y) { return x.first > y.first; });

  double best2 = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const double bound_i = ranked[i].first + ranked[0].first;
    if (bound_i * bound_i * (1.0 + 1e-12) < best2) break;
    for (std::size_t j = i + 1; j < ranked.size(); ++j) {
      const double bound = ranked[i].first + ranked[j].first;
      if (bound * bound * (1.0 + 1e-12) < best2) break;
      best2 = std::max(best2, (ranked[i].second - ranked[j].second).squaredNorm());
    }
  }
  return std::sqrt(best2);
}

}  // namespace

std::string_view metric_name(MetricKind kind) {
  return kind == MetricKind::kAddS ? "ADD-S" : "ADD";
}

std::optional<MetricKind> parse_metric_name(std::string_view name) {
  if (name == "ADD" || name == "add") return MetricKind::kAdd;
  if (name == "ADD-S" || name == "adds" || name == "add-s") return MetricKind::kAddS;
  return std::nullopt;
}

double add_error(const PointCloud &model, const Pose &est, const Pose &gt) {
  require_nonempty(model);
  double sum = 0.0;
  for (const Vec3 &x : model.points) {
    sum += (geometry::transform_point(est, x) - geometry::transform_point(gt, x)).norm();
  }
  return sum / static_cast<double>(model.points.size());
}

double adds_error(const PointCloud &model, const Pose &est, const Pose &gt) {
  require_nonempty(model);
  const PointKdTree tree(transformed(model, gt));
  double sum = 0.0;
  for (const Vec3 &x : model.points) {
    sum += std::sqrt(tree.nearest(geometry::transform_point(est, x)).squared_distance);
  }
  return sum / static_cast<double>(model.points.size());
}

double adds_error_bruteforce(const PointCloud &model, const Pose &est, const Pose &gt) {
  require_nonempty(model);
  const std::vector<Vec3> target = transformed(model, gt);
  double sum = 0.0;
  for (const Vec3 &x : model.points) {
    const Vec3 p = geometry::transform_point(est, x);
    double best2 = std::numeric_limits<double>::infinity();
    for (const Vec3 &q : target) best2 = std::min(best2, (q - p).squaredNorm());
    sum += std::sqrt(best2);
  }
  return sum / static_cast<double>(model.points.size());
}

bool is_correct(double error, const ModelInfo &info, double k_m) {
  return error < k_m * info.diameter;
}

MetricKind metric_dispatch(const ModelInfo &info) {
  return info.symmetric ? MetricKind::kAddS : MetricKind::kAdd;
}

double pose_error(MetricKind kind, const PointCloud &model, const Pose &est,
                  const Pose &gt) {
  return kind == MetricKind::kAddS ? adds_error(model, est, gt)
                                   : add_error(model, est, gt);
}

double aggregate(std::span<const ErrorRecord> records) {
  if (records.empty())
    fail(ErrorCode::kInvalidArgument, "cannot aggregate an empty record list");
  const auto correct = std::count_if(records.begin(), records.end(),
                                     [](const ErrorRecord &r) { return r.correct; });
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

AccuracyTable cross_table(double accuracy_a, double accuracy_b) {
  const auto in_range = [](double a) { return a >= 0.0 && a <= 1.0; };
  if (!in_range(accuracy_a) || !in_range(accuracy_b))
    fail(ErrorCode::kInvalidArgument, "accuracies must lie in [0, 1]");
  return {accuracy_a, accuracy_b, (accuracy_a + accuracy_b) / 2.0};
}

double model_diameter_bruteforce(const PointCloud &model) {
  if (model.points.size() < 2)
    fail(ErrorCode::kInvalidArgument, "diameter needs at least two points");
  double best2 = 0.0;
  const auto &pts = model.points;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best2 = std::max(best2, (pts[i] - pts[j]).squaredNorm());
  return std::sqrt(best2);
}

double model_diameter_hull_restricted(const PointCloud &model) {
  if (model.points.size() < 2)
    fail(ErrorCode::kInvalidArgument, "diameter needs at least two points");
  const auto &pts = model.points;

  // Extreme points along probe directions are hull vertices; anything strictly
  // inside their hull cannot be a diameter endpoint.
  std::vector<std::size_t> extreme;
  for (const Vec3 &dir : probe_directions(48)) {
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].dot(dir) < pts[lo].dot(dir)) lo = i;
      if (pts[i].dot(dir) > pts[hi].dot(dir)) hi = i;
    }
    extreme.push_back(lo);
    extreme.push_back(hi);
  }
  std::sort(extreme.begin(), extreme.end());
  extreme.erase(std::unique(extreme.begin(), extreme.end()), extreme.end());

  std::vector<Vec3> seeds;
  for (std::size_t i : extreme) seeds.push_back(pts[i]);
  double scale = 0.0;
  for (const Vec3 &p : seeds) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * std::max(scale, 1.0);
  const std::vector<Plane> planes = hull_planes(seeds, tol * std::max(scale, 1.0));

  std::vector<Vec3> candidates;
  for (const Vec3 &p : pts) {
    bool interior = !planes.empty();
    for (const Plane &pl : planes) {
      if (!(pl.normal.dot(p) - pl.offset < -tol)) {
        interior = false;
        break;
      }
    }
    if (!interior) candidates.push_back(p);
  }
  if (candidates.size() < 2) return model_diameter_bruteforce(model);
  return max_pair_distance(std::move(candidates));
}

double model_diameter(const PointCloud &model) {
  return model.points.size() <= kDiameterBruteForceLimit
             ? model_diameter_bruteforce(model)
             : model_diameter_hull_restricted(model);
}

}  // namespace posebias::metrics
