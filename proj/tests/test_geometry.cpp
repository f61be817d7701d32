#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nbv/error.hpp"
#include "nbv/geometry.hpp"
#include "nbv/housegen.hpp"
#include "nbv/random.hpp"
#include "nbv/ray_accel.hpp"
#include "support.hpp"

namespace nbv {
namespace {

using testing::box_mesh;
using testing::unit_cube;

TEST(Mesh, CubeSurfaceAreaIsSix) {
  EXPECT_NEAR(unit_cube().surface_area(), 6.0, 1e-12);
}

TEST(Mesh, RejectsBadIndicesAndDegenerateFaces) {
  const std::vector<Vec3> v = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  EXPECT_THROW(Mesh(v, {{0, 1, 3}}, {0.5}), Error);
  EXPECT_THROW(Mesh(v, {{0, 1, 1}}, {0.5}), Error);
  EXPECT_THROW(Mesh(v, {{0, 1, 2}}, {}), Error);
  EXPECT_THROW(Mesh(v, {{0, 1, 2}}, {1.5}), Error);
}

TEST(MeshIo, ReadsOneTriangleWithAlbedo) {
  std::istringstream in("# albedo 0.25\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const Mesh m = read_mesh(in);
  ASSERT_EQ(m.num_vertices(), 3u);
  ASSERT_EQ(m.num_faces(), 1u);
  EXPECT_EQ(m.face_albedo()[0], 0.25);
  EXPECT_NEAR(m.face_area(0), 0.5, 1e-15);
}

TEST(MeshIo, OutOfRangeIndexReportsLine) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n");
  try {
    read_mesh(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(MeshIo, QuadFaceIsUnsupported) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  EXPECT_THROW(read_mesh(in), UnsupportedFaceError);
}

TEST(MeshIo, RoundTripIsExact) {
  const Mesh m = generate_house(sample_spec(3));
  std::stringstream buf;
  write_mesh(buf, m);
  EXPECT_EQ(read_mesh(buf), m);
}

TEST(PlyIo, RoundTripIsExactAtFloatPrecision) {
  const PointCloud c = sample_surface(unit_cube(), 257, 5);
  std::stringstream buf;
  write_ply(buf, c);
  const PointCloud back = read_ply(buf);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back.points[i], c.points[i].cast<float>().cast<double>());
  std::stringstream again;
  write_ply(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(SampleSurface, SingleTriangleSamplesStayInside) {
  const Mesh tri({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}, {1.0});
  const PointCloud c = sample_surface(tri, 5, 11);
  ASSERT_EQ(c.size(), 5u);
  for (const Vec3& p : c.points) {
    EXPECT_GE(p.x(), 0.0);
    EXPECT_GE(p.y(), 0.0);
    EXPECT_LE(p.x() + p.y(), 1.0 + 1e-12);
    EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(SampleSurface, FaceCountsMatchAreaWithinFourSigma) {
  // Each of the cube's 12 triangles has area 0.5 of 6, so a face count is
  // Binomial(n, 1/12).
  const Mesh cube = unit_cube();
  const std::size_t n = 12000;
  const PointCloud c = sample_surface(cube, n, 2);
  std::vector<int> per_side(6, 0);
  for (const Vec3& p : c.points) {
    int axis = 0;
    p.cwiseAbs().maxCoeff(&axis);
    ++per_side[static_cast<std::size_t>(2 * axis + (p[axis] > 0 ? 1 : 0))];
  }
  const double pr = 1.0 / 6.0;
  const double mean = n * pr;
  const double sigma = std::sqrt(n * pr * (1 - pr));
  for (int k : per_side) EXPECT_LT(std::abs(k - mean), 4 * sigma);
}

TEST(SampleSurface, DeterministicPerSeed) {
  const Mesh m = unit_cube();
  EXPECT_EQ(sample_surface(m, 100, 9).points, sample_surface(m, 100, 9).points);
  EXPECT_NE(sample_surface(m, 100, 9).points, sample_surface(m, 100, 10).points);
}

TEST(SampleExposedSurface, SkipsGroundAndBuriedSurface) {
  // Two overlapping boxes on the ground: no sample on the bottom faces or
  // strictly inside the other box.
  const Mesh a = box_mesh(Vec3(0, 0, 0), Vec3(2, 2, 2));
  const Mesh b = box_mesh(Vec3(1, 1, 0), Vec3(3, 3, 1));
  const Mesh m = a.merged(b);
  std::vector<std::uint32_t> faces;
  const PointCloud c = sample_exposed_surface(m, 4000, 1, 0.0, &faces);
  ASSERT_EQ(faces.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3& p = c.points[i];
    EXPECT_GT(p.z(), 0.0);
    // Samples on a face may sit an ulp inside it.
    const double e = 1e-9;
    const bool in_a = (p.array() > e).all() && (p.array() < 2.0 - e).all();
    const bool in_b = p.x() > 1 + e && p.x() < 3 - e && p.y() > 1 + e && p.y() < 3 - e && p.z() > e && p.z() < 1 - e;
    EXPECT_FALSE(in_a || in_b) << p.transpose();
    EXPECT_LT(m.face_normal(faces[i]).z(), 1.0 + 1e-12);
  }
}

TEST(Raycast, HitsUnitCubeTop) {
  const RayAccel accel(unit_cube());
  const auto hit = accel.raycast(Vec3(0, 0, 5), Vec3(0, 0, -1));
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 4.5, 1e-12);
  EXPECT_NEAR((hit->normal - Vec3(0, 0, 1)).norm(), 0.0, 1e-12);
}

TEST(Raycast, MissReturnsNothing) {
  const RayAccel accel(unit_cube());
  EXPECT_FALSE(accel.raycast(Vec3(0, 0, 5), Vec3(0, 0, 1)));
  EXPECT_FALSE(accel.raycast(Vec3(2, 0, 5), Vec3(0, 0, -1)));
}

TEST(Raycast, BvhMatchesBruteForce) {
  const Mesh m = generate_house(sample_spec(7));
  const RayAccel accel(m);
  const Aabb box = bounding_box(m);
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    Vec3 o, d;
    for (int k = 0; k < 3; ++k) {
      o[k] = rng.uniform(box.min[k] - 20, box.max[k] + 20);
      d[k] = rng.normal();
    }
    if (i % 2 == 0) d = box.center() - o + Vec3(rng.normal(), rng.normal(), rng.normal());
    d.normalize();
    const auto a = accel.raycast(o, d);
    const auto b = raycast_brute(m, o, d);
    ASSERT_EQ(a.has_value(), b.has_value()) << "ray " << i;
    if (a) {
      EXPECT_EQ(a->t, b->t) << "ray " << i;
      EXPECT_EQ(a->face, b->face) << "ray " << i;
    }
  }
}

TEST(Watertight, CubeIsWatertight) {
  const auto r = watertight_check(unit_cube());
  EXPECT_TRUE(r.is_watertight);
  EXPECT_EQ(r.boundary_edges, 0u);
  EXPECT_EQ(r.nonmanifold_edges, 0u);
  EXPECT_EQ(r.inconsistent_edges, 0u);
  EXPECT_NEAR(signed_volume(unit_cube()), 1.0, 1e-12);
}

TEST(Watertight, OpenCubeHasFourBoundaryEdges) {
  const Mesh cube = unit_cube();
  std::vector<Face> f(cube.faces().begin() + 2, cube.faces().end());
  const Mesh open(cube.vertices(), f, std::vector<double>(f.size(), 0.5));
  const auto r = watertight_check(open);
  EXPECT_FALSE(r.is_watertight);
  EXPECT_EQ(r.boundary_edges, 4u);
}

TEST(Watertight, CubesSharingAnEdgeAreNonManifold) {
  // Second cube touches the first only along the edge x = 1, y = 1.
  const Mesh a = box_mesh(Vec3(0, 0, 0), Vec3(1, 1, 1));
  const Mesh b = box_mesh(Vec3(1, 1, 0), Vec3(2, 2, 1));
  std::vector<Vec3> v = a.vertices();
  std::vector<Face> f = a.faces();
  std::vector<std::uint32_t> remap;
  for (const Vec3& p : b.vertices()) {
    std::uint32_t id = static_cast<std::uint32_t>(v.size());
    for (std::uint32_t k = 0; k < a.num_vertices(); ++k) {
      if (a.vertices()[k] == p) id = k;
    }
    if (id == v.size()) v.push_back(p);
    remap.push_back(id);
  }
  for (const Face& g : b.faces()) f.push_back({remap[g[0]], remap[g[1]], remap[g[2]]});
  const Mesh m(v, f, std::vector<double>(f.size(), 0.5));
  const auto r = watertight_check(m);
  EXPECT_FALSE(r.is_watertight);
  EXPECT_EQ(r.nonmanifold_edges, 1u);
}

TEST(Watertight, FlippedFaceIsInconsistent) {
  const Mesh cube = unit_cube();
  std::vector<Face> f = cube.faces();
  std::swap(f[0][1], f[0][2]);
  const auto r = watertight_check(Mesh(cube.vertices(), f, cube.face_albedo()));
  EXPECT_FALSE(r.is_watertight);
  EXPECT_EQ(r.inconsistent_edges, 3u);
}

TEST(PointInside, ParityAgainstCube) {
  const Mesh cube = unit_cube();
  std::vector<std::uint32_t> all(cube.num_faces());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_TRUE(point_inside(cube, all, Vec3(0.1, 0.2, -0.3)));
  EXPECT_FALSE(point_inside(cube, all, Vec3(0.6, 0.0, 0.0)));
}

TEST(PointCloud, ValidateRejectsNonFinite) {
  PointCloud c;
  c.points.push_back(Vec3(0, std::nan(""), 0));
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace nbv
