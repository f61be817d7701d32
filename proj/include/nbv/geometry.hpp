#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace nbv {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

/// Faces with area at or below this are rejected.
inline constexpr double kMinFaceArea = 1e-12;

/// Indexed triangle surface with one reflectance per face.
///
/// Construction validates the invariants (indices in range, no degenerate
/// faces, one albedo per face) and throws nbv::Error otherwise. A default
/// constructed mesh is empty.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<double> face_albedo);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<double>& face_albedo() const { return face_albedo_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  bool empty() const { return faces_.empty(); }

  const Vec3& corner(std::size_t face, int k) const { return vertices_[faces_[face][k]]; }
  /// Unit normal following the right-hand rule on the face winding.
  Vec3 face_normal(std::size_t face) const;
  double face_area(std::size_t face) const;
  double surface_area() const;

  Mesh translated(const Vec3& offset) const;
  /// Concatenates `other` as a disconnected part (vertices are not shared).
  Mesh merged(const Mesh& other) const;

  bool operator==(const Mesh& o) const {
    return vertices_ == o.vertices_ && faces_ == o.faces_ && face_albedo_ == o.face_albedo_;
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<double> face_albedo_;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Throws nbv::Error when any coordinate is non-finite.
  void validate() const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return (max - min).norm(); }
  Aabb inflated(double margin) const {
    return {min.array() - margin, max.array() + margin};
  }
};

Aabb bounding_box(const Mesh& mesh);
Aabb bounding_box(const PointCloud& cloud);

/// Area-proportional uniform samples on the surface, deterministic per seed.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

/// Like sample_surface, but only from the exposed surface: faces resting on
/// the ground plane (downward normal at z == ground_z) and surface enclosed
/// by another closed part of the mesh are excluded by rejection. When
/// `faces` is given it receives the source face of each point.
PointCloud sample_exposed_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed,
                                  double ground_z = 0.0, std::vector<std::uint32_t>* faces = nullptr);

struct WatertightReport {
  bool is_watertight = false;
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;
  /// Edges shared by two faces traversing them in the same direction.
  std::size_t inconsistent_edges = 0;
};

WatertightReport watertight_check(const Mesh& mesh);

/// Signed enclosed volume; positive for outward-oriented closed meshes.
double signed_volume(const Mesh& mesh);

/// Partition of faces into vertex-connected parts. Returns part id per face.
std::vector<std::uint32_t> connected_parts(const Mesh& mesh, std::uint32_t* num_parts = nullptr);

/// Parity test against a subset of faces forming a closed surface.
bool point_inside(const Mesh& mesh, std::span<const std::uint32_t> faces, const Vec3& p);

// Text formats.
Mesh read_mesh(std::istream& in);
Mesh load_mesh(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

PointCloud read_ply(std::istream& in);
PointCloud load_ply(const std::filesystem::path& path);
void write_ply(std::ostream& out, const PointCloud& cloud);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace nbv
