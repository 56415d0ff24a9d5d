#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "posebias/geometry.hpp"

namespace posebias {

// Static 3-d tree for exact nearest-neighbour queries.
class PointKdTree {
 public:
  struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  explicit PointKdTree(std::vector<geometry::Vec3> points);

  std::size_t size() const { return points_.size(); }

  // Exact nearest neighbour; `index` refers to the construction order.
  Neighbor nearest(const geometry::Vec3 &query) const;

 private:
  struct Node {
    // Leaf when left == kNone.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = kNone;
    std::uint32_t right = kNone;
    int axis = 0;
    double split = 0.0;
  };
  static constexpr std::uint32_t kNone = 0xffffffffu;
  static constexpr std::uint32_t kLeafSize = 8;

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const geometry::Vec3 &query, Neighbor &best) const;

  std::vector<geometry::Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace posebias
