#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "nbv/geometry.hpp"

namespace nbv {

/// Static k-d tree over a point set. Immutable after construction; queries
/// are safe from many threads.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }

  struct Nearest {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double distance = std::numeric_limits<double>::infinity();
  };
  /// Exact nearest neighbour; `index` is max() on an empty tree.
  Nearest nearest(const Vec3& query) const;

  /// True when some point lies strictly closer than `radius`.
  bool any_within(const Vec3& query, double radius) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in points_ (leaf)
    std::uint32_t left = 0, right = 0;
    int axis = -1;  // -1: leaf
    double split = 0.0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& q, double& best2, std::size_t& best) const;
  bool within(std::uint32_t node, const Vec3& q, double r2) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> ids_;
  std::vector<Node> nodes_;
};

}  // namespace nbv
