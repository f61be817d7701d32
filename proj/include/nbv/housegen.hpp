#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nbv/geometry.hpp"

namespace nbv {

enum class RoofStyle { kFlat, kGabled, kPyramidal, kShed };
enum class AttachmentKind { kPorch, kWing, kDormer };

std::string to_string(RoofStyle style);
std::string to_string(AttachmentKind kind);
RoofStyle parse_roof_style(const std::string& s);
AttachmentKind parse_attachment_kind(const std::string& s);

/// A part added to the main body.
///
/// Porches sit against the front (-y) wall, wings against the +x wall and
/// dormers on the front slope of a gabled roof. `offset` in [-1, 1] slides
/// the part along its wall within the room left by its width.
struct Attachment {
  AttachmentKind kind = AttachmentKind::kPorch;
  double offset = 0.0;
  double width = 12.0;
  double depth = 6.0;
  double height = 10.0;

  bool operator==(const Attachment&) const = default;
};

/// Parametric house. Lengths are scene units; the main body is centered on
/// the origin with its base on z = 0. `wall_height` is per storey.
struct HouseSpec {
  double width = 30.0;   // along x
  double depth = 30.0;   // along y
  int storeys = 1;
  double wall_height = 24.0;
  RoofStyle roof_style = RoofStyle::kGabled;
  double roof_overhang = 3.0;
  double roof_rise = 16.0;
  std::vector<Attachment> attachments;
  int albedo_palette = 0;

  bool operator==(const HouseSpec&) const = default;
};

/// Roof slab thickness at the eaves.
inline constexpr double kRoofThickness = 3.0;
inline constexpr int kNumPalettes = 5;

/// Throws nbv::Error when a HouseSpec invariant is violated.
void validate(const HouseSpec& spec);

/// Watertight, outward-oriented house mesh, recentred so its bounding-box
/// center lies on the z axis. Pure function of the spec.
Mesh generate_house(const HouseSpec& spec);

/// Key used by the geometry split: footprint quantized to 5 units, storeys,
/// roof style and the sorted attachment kinds.
std::string geometry_key(const HouseSpec& spec);

/// Options sampled independently per field.
struct StyleVocabulary {
  std::vector<double> widths{24, 30, 36};
  std::vector<double> depths{24, 30, 36};
  std::vector<int> storeys{1, 2};
  std::vector<double> wall_heights{26, 30};
  std::vector<RoofStyle> roof_styles{RoofStyle::kFlat, RoofStyle::kGabled, RoofStyle::kPyramidal,
                                     RoofStyle::kShed};
  std::vector<double> overhangs{0, 3, 5};
  std::vector<double> roof_rises{14, 20};
  std::vector<std::vector<AttachmentKind>> attachment_sets{
      {},
      {AttachmentKind::kPorch},
      {AttachmentKind::kWing},
      {AttachmentKind::kDormer},
      {AttachmentKind::kPorch, AttachmentKind::kWing},
      {AttachmentKind::kPorch, AttachmentKind::kDormer}};
  std::vector<int> palettes{0, 1, 2, 3, 4};
};

/// Deterministic per seed. Attachments that cannot be placed on the drawn
/// body (dormers without a gabled roof) are dropped.
HouseSpec sample_spec(std::uint64_t seed, const StyleVocabulary& vocabulary = {});

enum class SplitMode { kRandom, kGeometry };

struct DatasetSplit {
  std::vector<HouseSpec> train;
  std::vector<HouseSpec> test;
  SplitMode mode = SplitMode::kRandom;
};

/// Random mode shuffles and takes round(test_fraction * n) for test.
/// Geometry mode shuffles the distinct geometry keys and moves whole key
/// groups to test until the target size is reached.
DatasetSplit split_dataset(const std::vector<HouseSpec>& specs, SplitMode mode, double test_fraction,
                           std::uint64_t seed);

}  // namespace nbv
