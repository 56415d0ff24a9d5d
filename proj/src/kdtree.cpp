#include "posebias/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace posebias {

using geometry::Vec3;

PointKdTree::PointKdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty())
    fail(ErrorCode::kInvalidArgument, "kd-tree requires at least one point");
  if (points_.size() >= kNone)
    fail(ErrorCode::kInvalidArgument, "kd-tree point count exceeds 32-bit index");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t PointKdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];

  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node &node = nodes_[id];
  node.left = left;
  node.right = right;
  node.axis = axis;
  node.split = split;
  return id;
}

void PointKdTree::search(std::uint32_t id, const Vec3 &query, Neighbor &best) const {
  const Node &node = nodes_[id];
  if (node.left == kNone) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && idx < best.index)) {
        best.squared_distance = d2;
        best.index = idx;
      }
    }
    return;
  }
  // Left subtree holds coordinates <= split, right holds >= split.
  const double diff = query[node.axis] - node.split;
  const std::uint32_t near_child = diff <= 0.0 ? node.left : node.right;
  const std::uint32_t far_child = diff <= 0.0 ? node.right : node.left;
  search(near_child, query, best);
  if (diff * diff <= best.squared_distance) search(far_child, query, best);
}

PointKdTree::Neighbor PointKdTree::nearest(const Vec3 &query) const {
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

}  // namespace posebias
