#include "nbv/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace nbv {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  ids_.resize(points_.size());
  std::iota(ids_.begin(), ids_.end(), std::size_t{0});
  if (points_.empty()) return;
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
  // build() only partitioned ids_; bring the points into the same order.
  std::vector<Vec3> sorted(points_.size());
  for (std::size_t k = 0; k < ids_.size(); ++k) sorted[k] = points_[ids_[k]];
  points_ = std::move(sorted);
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_[index].begin = begin;
  nodes_[index].end = end;
  if (end - begin <= kLeafSize) return index;

  Vec3 lo = points_[ids_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[ids_[i]]);
    hi = hi.cwiseMax(points_[ids_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return index;  // all coincident: keep as leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });

  nodes_[index].axis = axis;
  nodes_[index].split = points_[ids_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void KdTree::search(std::uint32_t n, const Vec3& q, double& best2, std::size_t& best) const {
  const Node& node = nodes_[n];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (points_[i] - q).squaredNorm();
      if (d2 < best2 || (d2 == best2 && ids_[i] < best)) {
        best2 = d2;
        best = ids_[i];
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, best2, best);
  if (diff * diff <= best2) search(far, q, best2, best);
}

bool KdTree::within(std::uint32_t n, const Vec3& q, double r2) const {
  const Node& node = nodes_[n];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      if ((points_[i] - q).squaredNorm() < r2) return true;
    }
    return false;
  }
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  if (within(near, q, r2)) return true;
  return diff * diff < r2 && within(far, q, r2);
}

KdTree::Nearest KdTree::nearest(const Vec3& query) const {
  Nearest out;
  if (points_.empty()) return out;
  double best2 = std::numeric_limits<double>::infinity();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  search(0, query, best2, best);
  out.index = best;
  out.distance = std::sqrt(best2);
  return out;
}

bool KdTree::any_within(const Vec3& query, double radius) const {
  if (points_.empty()) return false;
  return within(0, query, radius * radius);
}

}  // namespace nbv
