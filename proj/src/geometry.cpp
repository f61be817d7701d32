#include "nbv/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "nbv/error.hpp"
#include "nbv/random.hpp"
#include "nbv/ray_accel.hpp"

namespace nbv {

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<double> face_albedo)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), face_albedo_(std::move(face_albedo)) {
  if (face_albedo_.size() != faces_.size()) {
    throw Error("mesh: " + std::to_string(face_albedo_.size()) + " albedo values for " +
                std::to_string(faces_.size()) + " faces");
  }
  for (const Vec3& v : vertices_) {
    if (!v.allFinite()) throw Error("mesh: non-finite vertex coordinate");
  }
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (std::uint32_t idx : faces_[f]) {
      if (idx >= vertices_.size()) {
        throw Error("mesh: face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                    " of " + std::to_string(vertices_.size()));
      }
    }
    if (!(face_area(f) > kMinFaceArea)) {
      throw Error("mesh: face " + std::to_string(f) + " has zero area");
    }
    if (!(face_albedo_[f] >= 0.0 && face_albedo_[f] <= 1.0)) {
      throw Error("mesh: face " + std::to_string(f) + " albedo outside [0,1]");
    }
  }
}

Vec3 Mesh::face_normal(std::size_t face) const {
  const Vec3& a = corner(face, 0);
  return (corner(face, 1) - a).cross(corner(face, 2) - a).normalized();
}

double Mesh::face_area(std::size_t face) const {
  const Vec3& a = corner(face, 0);
  return 0.5 * (corner(face, 1) - a).cross(corner(face, 2) - a).norm();
}

double Mesh::surface_area() const {
  double total = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f) total += face_area(f);
  return total;
}

Mesh Mesh::translated(const Vec3& offset) const {
  Mesh out = *this;
  for (Vec3& v : out.vertices_) v += offset;
  return out;
}

Mesh Mesh::merged(const Mesh& other) const {
  Mesh out = *this;
  const auto base = static_cast<std::uint32_t>(vertices_.size());
  out.vertices_.insert(out.vertices_.end(), other.vertices_.begin(), other.vertices_.end());
  for (const Face& f : other.faces_) out.faces_.push_back({f[0] + base, f[1] + base, f[2] + base});
  out.face_albedo_.insert(out.face_albedo_.end(), other.face_albedo_.begin(), other.face_albedo_.end());
  return out;
}

void PointCloud::validate() const {
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw Error("point cloud: non-finite coordinate");
  }
}

Aabb bounding_box(const Mesh& mesh) {
  if (mesh.num_vertices() == 0) throw Error("bounding_box: empty mesh");
  Aabb box{mesh.vertices().front(), mesh.vertices().front()};
  for (const Vec3& v : mesh.vertices()) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  return box;
}

Aabb bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("bounding_box: empty point cloud");
  Aabb box{cloud.points.front(), cloud.points.front()};
  for (const Vec3& v : cloud.points) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  return box;
}

namespace {

struct AreaSampler {
  explicit AreaSampler(const Mesh& mesh) : mesh(mesh), cumulative(mesh.num_faces()) {
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
      acc += mesh.face_area(f);
      cumulative[f] = acc;
    }
  }

  std::pair<std::size_t, Vec3> draw(Rng& rng) const {
    const double x = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    std::size_t f = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 p = (1.0 - r1) * mesh.corner(f, 0) + r1 * (1.0 - r2) * mesh.corner(f, 1) +
                   r1 * r2 * mesh.corner(f, 2);
    return {f, p};
  }

  const Mesh& mesh;
  std::vector<double> cumulative;
};

}  // namespace

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw Error("sample_surface: empty mesh");
  if (n == 0) throw Error("sample_surface: n must be at least 1");
  AreaSampler sampler(mesh);
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cloud.points.push_back(sampler.draw(rng).second);
  return cloud;
}

PointCloud sample_exposed_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, double ground_z,
                                  std::vector<std::uint32_t>* faces) {
  if (mesh.empty()) throw Error("sample_exposed_surface: empty mesh");
  if (n == 0) throw Error("sample_exposed_surface: n must be at least 1");

  std::uint32_t num_parts = 0;
  const auto part = connected_parts(mesh, &num_parts);
  std::vector<std::vector<std::uint32_t>> part_faces(num_parts);
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) part_faces[part[f]].push_back(f);

  std::vector<bool> grounded(mesh.num_faces(), false);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const bool flat = std::abs(mesh.corner(f, 0).z() - ground_z) < 1e-9 &&
                      std::abs(mesh.corner(f, 1).z() - ground_z) < 1e-9 &&
                      std::abs(mesh.corner(f, 2).z() - ground_z) < 1e-9;
    grounded[f] = flat && mesh.face_normal(f).z() < 0.0;
  }
  std::vector<Aabb> part_box(num_parts);
  for (std::uint32_t p = 0; p < num_parts; ++p) {
    Aabb box{mesh.corner(part_faces[p][0], 0), mesh.corner(part_faces[p][0], 0)};
    for (std::uint32_t f : part_faces[p]) {
      for (int k = 0; k < 3; ++k) {
        box.min = box.min.cwiseMin(mesh.corner(f, k));
        box.max = box.max.cwiseMax(mesh.corner(f, k));
      }
    }
    part_box[p] = box;
  }

  AreaSampler sampler(mesh);
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  if (faces) faces->clear();
  const std::size_t max_draws = 1000 * n + 100000;
  for (std::size_t draws = 0; cloud.size() < n; ++draws) {
    if (draws >= max_draws) throw Error("sample_exposed_surface: no exposed surface");
    auto [f, p] = sampler.draw(rng);
    if (grounded[f]) continue;
    bool enclosed = false;
    for (std::uint32_t q = 0; q < num_parts && !enclosed; ++q) {
      if (q == part[f]) continue;
      const Aabb& b = part_box[q];
      if ((p.array() < b.min.array()).any() || (p.array() > b.max.array()).any()) continue;
      enclosed = point_inside(mesh, part_faces[q], p);
    }
    if (enclosed) continue;
    cloud.points.push_back(p);
    if (faces) faces->push_back(static_cast<std::uint32_t>(f));
  }
  return cloud;
}

WatertightReport watertight_check(const Mesh& mesh) {
  // Undirected edge -> (uses, uses in the low->high direction).
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, int>> edges;
  for (const Face& f : mesh.faces()) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f[k];
      const std::uint32_t b = f[(k + 1) % 3];
      auto& e = edges[{std::min(a, b), std::max(a, b)}];
      ++e.first;
      if (a < b) ++e.second;
    }
  }
  WatertightReport report;
  for (const auto& [key, use] : edges) {
    if (use.first == 1) {
      ++report.boundary_edges;
    } else if (use.first > 2) {
      ++report.nonmanifold_edges;
    } else if (use.second != 1) {
      ++report.inconsistent_edges;
    }
  }
  report.is_watertight = !mesh.empty() && report.boundary_edges == 0 &&
                         report.nonmanifold_edges == 0 && report.inconsistent_edges == 0;
  return report;
}

double signed_volume(const Mesh& mesh) {
  double v = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    v += mesh.corner(f, 0).dot(mesh.corner(f, 1).cross(mesh.corner(f, 2)));
  }
  return v / 6.0;
}

std::vector<std::uint32_t> connected_parts(const Mesh& mesh, std::uint32_t* num_parts) {
  std::vector<std::uint32_t> parent(mesh.num_vertices());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Face& f : mesh.faces()) {
    for (int k = 1; k < 3; ++k) {
      const std::uint32_t a = find(f[0]);
      const std::uint32_t b = find(f[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::map<std::uint32_t, std::uint32_t> label;
  std::vector<std::uint32_t> out(mesh.num_faces());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const std::uint32_t root = find(mesh.faces()[f][0]);
    auto [it, inserted] = label.emplace(root, static_cast<std::uint32_t>(label.size()));
    out[f] = it->second;
  }
  if (num_parts) *num_parts = static_cast<std::uint32_t>(label.size());
  return out;
}

bool point_inside(const Mesh& mesh, std::span<const std::uint32_t> faces, const Vec3& p) {
  // Skewed direction keeps the ray off edges of axis-aligned geometry.
  static const Vec3 dir = Vec3(0.5377, 0.3119, 0.7833).normalized();
  int crossings = 0;
  for (std::uint32_t f : faces) {
    if (intersect_triangle(p, dir, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2)) > 0.0) {
      ++crossings;
    }
  }
  return crossings % 2 == 1;
}

// ---------------------------------------------------------------------------
// Text formats

namespace {

template <typename T = double>
T parse_double(std::string_view tok, std::size_t line) {
  T v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw FormatError("expected a number, got '" + std::string(tok) + "'", line);
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

constexpr double kDefaultAlbedo = 0.8;

}  // namespace

Mesh read_mesh(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<double> albedo;
  std::vector<std::size_t> face_line;
  double current_albedo = kDefaultAlbedo;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "#") {
      if (tok.size() >= 3 && tok[1] == "albedo") {
        current_albedo = parse_double(tok[2], lineno);
        if (current_albedo < 0.0 || current_albedo > 1.0) {
          throw FormatError("albedo outside [0,1]", lineno);
        }
      }
      continue;
    }
    if (tok[0] == "v") {
      if (tok.size() < 4) throw FormatError("vertex needs 3 coordinates", lineno);
      vertices.emplace_back(parse_double(tok[1], lineno), parse_double(tok[2], lineno),
                            parse_double(tok[3], lineno));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) {
        throw UnsupportedFaceError("only triangular faces are supported, got " +
                                       std::to_string(tok.size() - 1) + " indices",
                                   lineno);
      }
      Face face{};
      for (int k = 0; k < 3; ++k) {
        std::string_view t = tok[k + 1];
        t = t.substr(0, t.find('/'));
        long idx = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
          throw FormatError("bad face index '" + std::string(tok[k + 1]) + "'", lineno);
        }
        if (idx < 1) throw FormatError("face indices are 1-based and positive", lineno);
        face[k] = static_cast<std::uint32_t>(idx - 1);
      }
      faces.push_back(face);
      albedo.push_back(current_albedo);
      face_line.push_back(lineno);
    }
    // Other OBJ statements (vn, vt, o, g, s, ...) are ignored.
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::uint32_t idx : faces[f]) {
      if (idx >= vertices.size()) {
        throw FormatError("face references vertex " + std::to_string(idx + 1) + " of " +
                              std::to_string(vertices.size()),
                          face_line[f]);
      }
    }
  }
  try {
    return Mesh(std::move(vertices), std::move(faces), std::move(albedo));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(e.what(), 0);
  }
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file " + path.string());
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  for (const Vec3& v : mesh.vertices()) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z())
        << '\n';
  }
  double run_albedo = -1.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face_albedo()[f] != run_albedo) {
      run_albedo = mesh.face_albedo()[f];
      out << "# albedo " << format_double(run_albedo) << '\n';
    }
    const Face& face = mesh.faces()[f];
    out << "f " << face[0] + 1 << ' ' << face[1] + 1 << ' ' << face[2] + 1 << '\n';
  }
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw FormatError("unexpected end of PLY file", lineno);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next();
  if (line != "ply") throw FormatError("missing 'ply' magic", lineno);
  std::size_t count = 0;
  bool in_vertex = false;
  std::vector<std::string> props;
  for (;;) {
    next();
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") throw FormatError("only ascii PLY is supported", lineno);
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw FormatError("bad element line", lineno);
      in_vertex = tok[1] == "vertex";
      if (in_vertex) count = static_cast<std::size_t>(parse_double(tok[2], lineno));
    } else if (tok[0] == "property") {
      if (in_vertex) props.emplace_back(tok.back());
    } else if (tok[0] == "end_header") {
      break;
    } else {
      throw FormatError("unexpected header line '" + line + "'", lineno);
    }
  }
  const auto col = [&](const char* name) {
    auto it = std::find(props.begin(), props.end(), name);
    if (it == props.end()) throw FormatError(std::string("PLY vertex lacks property ") + name, 0);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t cx = col("x"), cy = col("y"), cz = col("z");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    next();
    const auto tok = split_ws(line);
    if (tok.size() < props.size()) throw FormatError("vertex row has too few values", lineno);
    // Properties are declared float, so parse at float precision.
    cloud.points.emplace_back(parse_double<float>(tok[cx], lineno), parse_double<float>(tok[cy], lineno),
                              parse_double<float>(tok[cz], lineno));
  }
  return cloud;
}

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open PLY file " + path.string());
  return read_ply(in);
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Vec3& p : cloud.points) {
    out << format_float(static_cast<float>(p.x())) << ' ' << format_float(static_cast<float>(p.y()))
        << ' ' << format_float(static_cast<float>(p.z())) << '\n';
  }
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write PLY file " + path.string());
  write_ply(out, cloud);
}

}  // namespace nbv
