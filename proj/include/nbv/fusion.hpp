#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nbv/camera.hpp"
#include "nbv/geometry.hpp"

namespace nbv {

struct FusionParams {
  double truncation = 3.0;
  double max_weight = 32.0;
  /// Upper bound on voxel storage (tsdf + weight), bytes.
  std::size_t memory_cap_bytes = std::size_t{512} << 20;
};

/// Dense truncated signed distance volume.
///
/// tsdf is stored normalized by the truncation distance, so |tsdf| <= 1.
/// A voxel is observed iff its weight is positive.
class TsdfVolume {
 public:
  /// Covers `bounds` inflated by the truncation distance. Throws when the
  /// voxel size is not positive, bounds are empty, the truncation is below
  /// two voxels, or the grid exceeds the memory cap.
  TsdfVolume(const Aabb& bounds, double voxel_size, const FusionParams& params);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const FusionParams& params() const { return params_; }
  std::size_t num_voxels() const { return tsdf_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x;
  }
  Vec3 voxel_center(int x, int y, int z) const {
    return origin_ + voxel_size_ * Vec3(x, y, z);
  }
  float tsdf(int x, int y, int z) const { return tsdf_[index(x, y, z)]; }
  float weight(int x, int y, int z) const { return weight_[index(x, y, z)]; }
  const std::vector<float>& tsdf_values() const { return tsdf_; }
  const std::vector<float>& weights() const { return weight_; }

  /// Fuses one depth image taken from `camera`.
  void integrate(const DepthImage& depth, const Extrinsics& camera, const CameraModel& model);

  /// Zero crossings between axis-adjacent observed voxels, linearly
  /// interpolated. Empty when nothing has been observed.
  PointCloud extract_points() const;

  /// Binary debug dump: int32 dims[3], float64 origin[3], float64 voxel
  /// size, float32 tsdf[n], float32 weight[n]; all little-endian.
  void write_dump(std::ostream& out) const;
  static TsdfVolume read_dump(std::istream& in, const FusionParams& params = {});

 private:
  TsdfVolume() = default;

  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 1.0;
  std::array<int, 3> dims_{};
  FusionParams params_;
  std::vector<float> tsdf_;
  std::vector<float> weight_;
};

/// Defaults used by the environment: voxel = diagonal / 128 and truncation
/// of three voxels.
struct FusionDefaults {
  double voxel_size;
  FusionParams params;
};
FusionDefaults default_fusion(const Aabb& target_bounds, int voxels_per_diagonal = 128);

}  // namespace nbv
