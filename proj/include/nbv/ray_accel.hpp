#pragma once

#include <optional>
#include <vector>

#include "nbv/geometry.hpp"

namespace nbv {

/// Hits closer than this along the ray are ignored.
inline constexpr double kRayEpsilon = 1e-6;

struct Hit {
  double t = 0.0;
  std::uint32_t face = 0;
  /// Unit face normal, flipped to point back toward the ray origin.
  Vec3 normal = Vec3::UnitZ();
};

/// Bounding-volume hierarchy over a mesh (median split on the longest
/// centroid axis). Read-only after construction; concurrent queries are safe.
class RayAccel {
 public:
  /// An empty mesh gives an empty scene that every ray misses.
  explicit RayAccel(Mesh mesh);

  const Mesh& mesh() const { return mesh_; }

  /// Nearest hit with t > kRayEpsilon. Ties on t resolve to the lowest face
  /// index so results match the brute-force scan exactly.
  std::optional<Hit> raycast(const Vec3& origin, const Vec3& direction) const;

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0;  // leaf: first index into order_; inner: left child
    std::uint32_t count = 0;  // leaf: number of faces; inner: 0
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);

  Mesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

RayAccel build_accel(const Mesh& mesh);

inline std::optional<Hit> raycast(const RayAccel& accel, const Vec3& origin, const Vec3& direction) {
  return accel.raycast(origin, direction);
}

/// Reference all-faces scan.
std::optional<Hit> raycast_brute(const Mesh& mesh, const Vec3& origin, const Vec3& direction);

/// Ray/triangle intersection distance (Moller-Trumbore), or a negative value.
double intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a, const Vec3& b,
                          const Vec3& c);

}  // namespace nbv
