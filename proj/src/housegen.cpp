#include "nbv/housegen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "nbv/error.hpp"
#include "nbv/random.hpp"

namespace nbv {

std::string to_string(RoofStyle style) {
  switch (style) {
    case RoofStyle::kFlat: return "flat";
    case RoofStyle::kGabled: return "gabled";
    case RoofStyle::kPyramidal: return "pyramidal";
    case RoofStyle::kShed: return "shed";
  }
  return "?";
}

std::string to_string(AttachmentKind kind) {
  switch (kind) {
    case AttachmentKind::kPorch: return "porch";
    case AttachmentKind::kWing: return "wing";
    case AttachmentKind::kDormer: return "dormer";
  }
  return "?";
}

RoofStyle parse_roof_style(const std::string& s) {
  for (RoofStyle r : {RoofStyle::kFlat, RoofStyle::kGabled, RoofStyle::kPyramidal, RoofStyle::kShed}) {
    if (to_string(r) == s) return r;
  }
  throw Error("unknown roof style '" + s + "'");
}

AttachmentKind parse_attachment_kind(const std::string& s) {
  for (AttachmentKind k : {AttachmentKind::kPorch, AttachmentKind::kWing, AttachmentKind::kDormer}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown attachment kind '" + s + "'");
}

namespace {

struct Palette {
  double walls, roof, trim;
};

constexpr std::array<Palette, kNumPalettes> kPalettes{{
    {0.85, 0.35, 0.65},
    {0.70, 0.25, 0.90},
    {0.60, 0.45, 0.80},
    {0.90, 0.55, 0.50},
    {0.75, 0.30, 0.60},
}};

// Penetration depth of parts into each other, so no two parts share a face.
constexpr double kEmbed = 1.0;
constexpr double kCanopyOverhang = 1.5;
constexpr double kCanopyThickness = 2.0;

/// Closed solid lofted through a stack of convex rings (same vertex count),
/// capped by a fan at both ends or closed by an apex at the top.
Mesh loft(const std::vector<std::vector<Vec3>>& rings, const std::optional<Vec3>& apex, double albedo) {
  const std::size_t n = rings.front().size();
  std::vector<Vec3> vertices;
  for (const auto& ring : rings) vertices.insert(vertices.end(), ring.begin(), ring.end());
  std::vector<Face> faces;
  auto idx = [n](std::size_t r, std::size_t i) { return static_cast<std::uint32_t>(r * n + i % n); };
  for (std::size_t i = 1; i + 1 < n; ++i) faces.push_back({idx(0, 0), idx(0, i + 1), idx(0, i)});
  for (std::size_t r = 0; r + 1 < rings.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      faces.push_back({idx(r, i), idx(r, i + 1), idx(r + 1, i + 1)});
      faces.push_back({idx(r, i), idx(r + 1, i + 1), idx(r + 1, i)});
    }
  }
  const std::size_t top = rings.size() - 1;
  if (apex) {
    const auto a = static_cast<std::uint32_t>(vertices.size());
    vertices.push_back(*apex);
    for (std::size_t i = 0; i < n; ++i) faces.push_back({idx(top, i), idx(top, i + 1), a});
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) faces.push_back({idx(top, 0), idx(top, i), idx(top, i + 1)});
  }
  Mesh mesh(vertices, faces, std::vector<double>(faces.size(), albedo));
  if (signed_volume(mesh) < 0.0) {
    for (Face& f : faces) std::swap(f[1], f[2]);
    mesh = Mesh(std::move(vertices), std::move(faces), std::vector<double>(mesh.num_faces(), albedo));
  }
  return mesh;
}

Mesh box(const Vec3& lo, const Vec3& hi, double albedo) {
  auto ring = [&](double z) {
    return std::vector<Vec3>{{lo.x(), lo.y(), z}, {hi.x(), lo.y(), z}, {hi.x(), hi.y(), z}, {lo.x(), hi.y(), z}};
  };
  return loft({ring(lo.z()), ring(hi.z())}, std::nullopt, albedo);
}

/// Convex (y, z) profile extruded along x over [x0, x1].
Mesh prism_x(const std::vector<std::array<double, 2>>& profile, double x0, double x1, double albedo) {
  std::vector<Vec3> a, b;
  for (const auto& p : profile) {
    a.emplace_back(x0, p[0], p[1]);
    b.emplace_back(x1, p[0], p[1]);
  }
  return loft({a, b}, std::nullopt, albedo);
}

/// Convex (x, z) profile extruded along y over [y0, y1].
Mesh prism_y(const std::vector<std::array<double, 2>>& profile, double y0, double y1, double albedo) {
  std::vector<Vec3> a, b;
  for (const auto& p : profile) {
    a.emplace_back(p[0], y0, p[1]);
    b.emplace_back(p[0], y1, p[1]);
  }
  return loft({a, b}, std::nullopt, albedo);
}

std::string attachment_error(const Attachment& a, const std::string& why) {
  return "cannot place " + to_string(a.kind) + ": " + why;
}

}  // namespace

void validate(const HouseSpec& s) {
  if (!(s.width > 0 && s.depth > 0 && s.wall_height > 0 && s.roof_rise > 0)) {
    throw Error("house spec: lengths must be positive");
  }
  if (s.storeys < 1 || s.storeys > 2) throw Error("house spec: storeys must be 1 or 2");
  if (!(s.roof_overhang >= 0.0)) throw Error("house spec: overhang must be non-negative");
  if (s.roof_overhang > std::min(s.width, s.depth) / 4.0) {
    throw Error("house spec: overhang exceeds a quarter of the footprint");
  }
  if (s.albedo_palette < 0 || s.albedo_palette >= kNumPalettes) {
    throw Error("house spec: unknown albedo palette " + std::to_string(s.albedo_palette));
  }
  for (const Attachment& a : s.attachments) {
    if (!(a.width > 0 && a.depth > 0 && a.height > 0)) {
      throw Error(attachment_error(a, "dimensions must be positive"));
    }
    if (!(a.offset >= -1.0 && a.offset <= 1.0)) throw Error(attachment_error(a, "offset outside [-1, 1]"));
  }
}

Mesh generate_house(const HouseSpec& s) {
  validate(s);
  const Palette& pal = kPalettes[s.albedo_palette];
  const double hw = s.width / 2.0;
  const double hd = s.depth / 2.0;
  const double eave = s.storeys * s.wall_height;
  const double o = s.roof_overhang;
  const double t = kRoofThickness;
  const double rise = s.roof_rise;

  Mesh house;
  if (o == 0.0) {
    // Walls and roof form one solid; there is nothing under the roof.
    switch (s.roof_style) {
      case RoofStyle::kFlat:
        house = box({-hw, -hd, 0}, {hw, hd, eave + t}, pal.walls);
        break;
      case RoofStyle::kGabled:
        house = prism_x({{-hd, 0}, {hd, 0}, {hd, eave}, {0, eave + rise}, {-hd, eave}}, -hw, hw, pal.walls);
        break;
      case RoofStyle::kShed:
        house = prism_x({{-hd, 0}, {hd, 0}, {hd, eave}, {-hd, eave + rise}}, -hw, hw, pal.walls);
        break;
      case RoofStyle::kPyramidal: {
        auto ring = [&](double z) {
          return std::vector<Vec3>{{-hw, -hd, z}, {hw, -hd, z}, {hw, hd, z}, {-hw, hd, z}};
        };
        house = loft({ring(0), ring(eave)}, Vec3(0, 0, eave + rise), pal.walls);
        break;
      }
    }
  } else {
    house = box({-hw, -hd, 0}, {hw, hd, eave + kEmbed}, pal.walls);
    const double rx = hw + o, ry = hd + o;
    Mesh roof;
    switch (s.roof_style) {
      case RoofStyle::kFlat:
        roof = box({-rx, -ry, eave}, {rx, ry, eave + t}, pal.roof);
        break;
      case RoofStyle::kGabled:
        roof = prism_x({{-ry, eave}, {ry, eave}, {ry, eave + t}, {0, eave + t + rise}, {-ry, eave + t}}, -rx, rx,
                       pal.roof);
        break;
      case RoofStyle::kShed:
        roof = prism_x({{-ry, eave}, {ry, eave}, {ry, eave + t}, {-ry, eave + t + rise}}, -rx, rx, pal.roof);
        break;
      case RoofStyle::kPyramidal: {
        auto ring = [&](double z) {
          return std::vector<Vec3>{{-rx, -ry, z}, {rx, -ry, z}, {rx, ry, z}, {-rx, ry, z}};
        };
        roof = loft({ring(eave), ring(eave + t)}, Vec3(0, 0, eave + t + rise), pal.roof);
        break;
      }
    }
    house = house.merged(roof);
  }

  for (const Attachment& a : s.attachments) {
    switch (a.kind) {
      case AttachmentKind::kPorch: {
        const double reach = a.width / 2.0 + kCanopyOverhang;
        const double room = hw - 0.5 - reach;
        if (room < 0.0) throw Error(attachment_error(a, "wider than the front wall"));
        if (a.height + kCanopyThickness > eave - 1.0) throw Error(attachment_error(a, "taller than the eaves"));
        const double cx = a.offset * room;
        const double y0 = -hd - a.depth;
        house = house.merged(box({cx - a.width / 2, y0, 0}, {cx + a.width / 2, -hd + kEmbed, a.height}, pal.trim));
        house = house.merged(box({cx - reach, y0 - kCanopyOverhang, a.height - 0.5},
                                 {cx + reach, -hd + kEmbed + 0.5, a.height + kCanopyThickness - 0.5}, pal.roof));
        break;
      }
      case AttachmentKind::kWing: {
        const double reach = a.width / 2.0 + kCanopyOverhang;
        const double room = hd - 0.5 - reach;
        if (room < 0.0) throw Error(attachment_error(a, "wider than the side wall"));
        if (a.height + kCanopyThickness > eave - 1.0) throw Error(attachment_error(a, "taller than the eaves"));
        const double cy = a.offset * room;
        const double x1 = hw + a.depth;
        house = house.merged(box({hw - kEmbed, cy - a.width / 2, 0}, {x1, cy + a.width / 2, a.height}, pal.trim));
        house = house.merged(box({hw - kEmbed - 0.5, cy - reach, a.height - 0.5},
                                 {x1 + kCanopyOverhang, cy + reach, a.height + kCanopyThickness - 0.5}, pal.roof));
        break;
      }
      case AttachmentKind::kDormer: {
        if (s.roof_style != RoofStyle::kGabled) throw Error(attachment_error(a, "needs a gabled roof"));
        const double half_span = hd + o;
        const double base = o == 0.0 ? eave : eave + t;
        const double roof_x = o == 0.0 ? hw : hw + o;
        const double room = roof_x - 1.0 - a.width / 2.0;
        if (room < 0.0) throw Error(attachment_error(a, "wider than the roof"));
        // Front face sits partway down the slope; the body runs back into the roof.
        const double y_front = -0.55 * half_span;
        const double y_back = -0.1 * half_span;
        const double slope_z = base + rise * (1.0 - std::abs(y_front) / half_span);
        const double z0 = slope_z - kEmbed;
        if (a.height <= kEmbed + 0.5) throw Error(attachment_error(a, "too short to clear the roof"));
        const double cx = a.offset * room;
        const double x0 = cx - a.width / 2, x1 = cx + a.width / 2;
        const double top = z0 + a.height;
        house = house.merged(
            prism_y({{x0, z0}, {x1, z0}, {x1, top}, {cx, top + a.width * 0.4}, {x0, top}}, y_front, y_back, pal.trim));
        break;
      }
    }
  }

  const Aabb bb = bounding_box(house);
  return house.translated(Vec3(-bb.center().x(), -bb.center().y(), 0.0));
}

std::string geometry_key(const HouseSpec& s) {
  std::vector<std::string> kinds;
  for (const Attachment& a : s.attachments) kinds.push_back(to_string(a.kind));
  std::sort(kinds.begin(), kinds.end());
  std::ostringstream os;
  os << static_cast<long>(std::lround(s.width / 5.0)) * 5 << 'x' << static_cast<long>(std::lround(s.depth / 5.0)) * 5
     << '_' << s.storeys << "s_" << to_string(s.roof_style);
  for (const auto& k : kinds) os << '+' << k;
  return os.str();
}

namespace {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& options, const char* field) {
  if (options.empty()) throw Error(std::string("vocabulary has no options for ") + field);
  return options[rng.uniform_int(options.size())];
}

}  // namespace

HouseSpec sample_spec(std::uint64_t seed, const StyleVocabulary& v) {
  Rng rng(seed);
  HouseSpec s;
  s.width = pick(rng, v.widths, "widths");
  s.depth = pick(rng, v.depths, "depths");
  s.storeys = pick(rng, v.storeys, "storeys");
  s.wall_height = pick(rng, v.wall_heights, "wall_heights");
  s.roof_style = pick(rng, v.roof_styles, "roof_styles");
  s.roof_overhang = std::min(pick(rng, v.overhangs, "overhangs"), std::min(s.width, s.depth) / 4.0);
  s.roof_rise = pick(rng, v.roof_rises, "roof_rises");
  const auto& kinds = pick(rng, v.attachment_sets, "attachment_sets");
  s.albedo_palette = pick(rng, v.palettes, "palettes");

  const double eave = s.storeys * s.wall_height;
  for (AttachmentKind kind : kinds) {
    Attachment a;
    a.kind = kind;
    a.offset = rng.uniform(-1.0, 1.0);
    switch (kind) {
      case AttachmentKind::kPorch:
        a.width = std::min(rng.uniform(10.0, 16.0), s.width - 2.0 * kCanopyOverhang - 2.0);
        a.depth = rng.uniform(5.0, 8.0);
        a.height = std::min(rng.uniform(8.0, 12.0), eave - kCanopyThickness - 2.0);
        break;
      case AttachmentKind::kWing:
        a.width = std::min(rng.uniform(12.0, 18.0), s.depth - 2.0 * kCanopyOverhang - 2.0);
        a.depth = rng.uniform(8.0, 12.0);
        a.height = std::min(rng.uniform(12.0, 18.0), eave - kCanopyThickness - 2.0);
        break;
      case AttachmentKind::kDormer:
        a.width = std::min(rng.uniform(6.0, 8.0), s.width - 4.0);
        a.depth = 1.0;
        a.height = rng.uniform(5.0, 7.0);
        break;
    }
    if (kind == AttachmentKind::kDormer && s.roof_style != RoofStyle::kGabled) continue;
    s.attachments.push_back(a);
  }
  return s;
}

DatasetSplit split_dataset(const std::vector<HouseSpec>& specs, SplitMode mode, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("split_dataset: test_fraction must be in (0,1)");
  DatasetSplit split;
  split.mode = mode;
  Rng rng(seed);
  const auto target = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(specs.size())));

  auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
  };

  if (mode == SplitMode::kRandom) {
    std::vector<std::size_t> order(specs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order);
    std::vector<bool> is_test(specs.size(), false);
    for (std::size_t i = 0; i < target; ++i) is_test[order[i]] = true;
    for (std::size_t i = 0; i < specs.size(); ++i) (is_test[i] ? split.test : split.train).push_back(specs[i]);
    return split;
  }

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < specs.size(); ++i) groups[geometry_key(specs[i])].push_back(i);
  if (groups.size() < 2) throw Error("split_dataset: geometry split needs at least two geometry classes");
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, members] : groups) order.push_back(&members);
  shuffle(order);
  std::vector<bool> is_test(specs.size(), false);
  std::size_t taken = 0, used_groups = 0;
  for (const auto* g : order) {
    if (taken >= target) break;
    if (taken + g->size() > target) continue;
    if (used_groups + 1 == order.size()) break;  // keep train non-empty
    for (std::size_t i : *g) is_test[i] = true;
    taken += g->size();
    ++used_groups;
  }
  if (taken == 0) {
    const auto* smallest = *std::min_element(order.begin(), order.end(),
                                             [](const auto* a, const auto* b) { return a->size() < b->size(); });
    for (std::size_t i : *smallest) is_test[i] = true;
  }
  for (std::size_t i = 0; i < specs.size(); ++i) (is_test[i] ? split.test : split.train).push_back(specs[i]);
  return split;
}

}  // namespace nbv
