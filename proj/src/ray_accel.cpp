#include "nbv/ray_accel.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "nbv/error.hpp"

namespace nbv {

namespace {

constexpr std::uint32_t kLeafSize = 4;

bool better(double t, std::uint32_t face, double best_t, std::uint32_t best_face) {
  return t < best_t || (t == best_t && face < best_face);
}

Hit make_hit(const Mesh& mesh, double t, std::uint32_t face, const Vec3& direction) {
  Vec3 n = mesh.face_normal(face);
  if (n.dot(direction) > 0.0) n = -n;
  return {t, face, n};
}

}  // namespace

double intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a, const Vec3& b,
                          const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  // A little slack on the barycentric bounds so rays through a shared edge
  // cannot slip between the two triangles.
  constexpr double kEdge = 1e-10;
  if (u < -kEdge || u > 1.0 + kEdge) return -1.0;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv;
  if (v < -kEdge || u + v > 1.0 + kEdge) return -1.0;
  const double t = e2.dot(q) * inv;
  return t > kRayEpsilon ? t : -1.0;
}

RayAccel::RayAccel(Mesh mesh) : mesh_(std::move(mesh)) {
  if (mesh_.empty()) return;
  const auto n = static_cast<std::uint32_t>(mesh_.num_faces());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    centroids[f] = (mesh_.corner(f, 0) + mesh_.corner(f, 1) + mesh_.corner(f, 2)) / 3.0;
  }
  nodes_.reserve(2 * n / kLeafSize + 1);
  build(0, n, centroids);
}

std::uint32_t RayAccel::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo, chi = hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    const std::uint32_t f = order_[i];
    for (int k = 0; k < 3; ++k) {
      lo = lo.cwiseMin(mesh_.corner(f, k));
      hi = hi.cwiseMax(mesh_.corner(f, k));
    }
    clo = clo.cwiseMin(centroids[f]);
    chi = chi.cwiseMax(centroids[f]);
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;
  if (end - begin <= kLeafSize) {
    nodes_[index].begin = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[index].begin = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<Hit> RayAccel::raycast(const Vec3& origin, const Vec3& direction) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv = direction.cwiseInverse();
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_face = std::numeric_limits<std::uint32_t>::max();

  auto box_entry = [&](const Node& node) {
    // Slab test; returns +inf on a miss.
    double t0 = 0.0, t1 = best_t;
    for (int a = 0; a < 3; ++a) {
      double ta = (node.lo[a] - origin[a]) * inv[a];
      double tb = (node.hi[a] - origin[a]) * inv[a];
      if (std::isnan(ta) || std::isnan(tb)) {
        // Ray parallel to and lying on the slab plane.
        if (origin[a] < node.lo[a] || origin[a] > node.hi[a]) return std::numeric_limits<double>::infinity();
        continue;
      }
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return std::numeric_limits<double>::infinity();
    }
    return t0;
  };

  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_entry(node) == std::numeric_limits<double>::infinity()) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.begin; i < node.begin + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const double t = intersect_triangle(origin, direction, mesh_.corner(f, 0), mesh_.corner(f, 1),
                                            mesh_.corner(f, 2));
        if (t > 0.0 && better(t, f, best_t, best_face)) {
          best_t = t;
          best_face = f;
        }
      }
      continue;
    }
    const double tl = box_entry(nodes_[node.begin]);
    const double tr = box_entry(nodes_[node.right]);
    // Push the farther child first so the nearer one is visited first.
    if (tl <= tr) {
      if (tr != std::numeric_limits<double>::infinity()) stack[top++] = node.right;
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.begin;
    } else {
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.begin;
      stack[top++] = node.right;
    }
  }
  if (best_face == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return make_hit(mesh_, best_t, best_face, direction);
}

RayAccel build_accel(const Mesh& mesh) {
  if (mesh.empty()) throw Error("build_accel: empty mesh");
  return RayAccel(mesh);
}

std::optional<Hit> raycast_brute(const Mesh& mesh, const Vec3& origin, const Vec3& direction) {
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_face = std::numeric_limits<std::uint32_t>::max();
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) {
    const double t =
        intersect_triangle(origin, direction, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2));
    if (t > 0.0 && better(t, f, best_t, best_face)) {
      best_t = t;
      best_face = f;
    }
  }
  if (best_face == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return make_hit(mesh, best_t, best_face, direction);
}

}  // namespace nbv
