#include "nbv/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "nbv/error.hpp"

namespace nbv {

TsdfVolume::TsdfVolume(const Aabb& bounds, double voxel_size, const FusionParams& params) : params_(params) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw Error("tsdf volume: voxel size must be positive");
  if (!((bounds.max - bounds.min).array() > 0.0).all()) throw Error("tsdf volume: bounds must have positive extent");
  if (!(params.truncation >= 2.0 * voxel_size)) throw Error("tsdf volume: truncation must be at least two voxels");
  if (!(params.max_weight >= 1.0)) throw Error("tsdf volume: max weight must be at least 1");
  voxel_size_ = voxel_size;
  origin_ = bounds.min.array() - params.truncation;
  const Vec3 span = bounds.extent().array() + 2.0 * params.truncation;
  double count = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double n = std::ceil(span[a] / voxel_size) + 1.0;
    dims_[a] = static_cast<int>(std::max(2.0, std::min(n, 1e9)));
    count *= std::max(2.0, n);
  }
  const double bytes = count * 2.0 * sizeof(float);
  if (bytes > static_cast<double>(params.memory_cap_bytes)) {
    std::ostringstream os;
    os << "tsdf volume: " << dims_[0] << 'x' << dims_[1] << 'x' << dims_[2] << " voxels need " << bytes / (1 << 20)
       << " MiB, above the cap of " << params.memory_cap_bytes / (1 << 20) << " MiB";
    throw Error(os.str());
  }
  const auto n = static_cast<std::size_t>(count);
  tsdf_.assign(n, 1.0f);
  weight_.assign(n, 0.0f);
}

void TsdfVolume::integrate(const DepthImage& depth, const Extrinsics& camera, const CameraModel& model) {
  if (depth.width != model.width || depth.height != model.height) {
    throw Error("integrate: depth image does not match the camera model");
  }
  const double f = model.focal();
  const double cx = 0.5 * model.width;
  const double cy = 0.5 * model.height;
  const double trunc = params_.truncation;
  const double max_w = params_.max_weight;
  const Vec3 step_x = camera.rotation.col(0) * voxel_size_;
  const Vec3 step_y = camera.rotation.col(1) * voxel_size_;
  const Vec3 step_z = camera.rotation.col(2) * voxel_size_;
  const Vec3 base = camera.to_camera(origin_);

  for (int z = 0; z < dims_[2]; ++z) {
    for (int y = 0; y < dims_[1]; ++y) {
      Vec3 cam = base + z * step_z + y * step_y;
      std::size_t i = index(0, y, z);
      for (int x = 0; x < dims_[0]; ++x, ++i, cam += step_x) {
        if (cam.z() <= 0.0) continue;
        const double px = f * cam.x() / cam.z() + cx;
        const double py = f * cam.y() / cam.z() + cy;
        if (!(px >= 0.0 && py >= 0.0 && px < model.width && py < model.height)) continue;
        const float d = depth.at(static_cast<int>(px), static_cast<int>(py));
        if (!(d > 0.0f)) continue;
        const double sdf = d - cam.z();
        if (sdf <= -trunc) continue;
        const float value = static_cast<float>(std::clamp(sdf / trunc, -1.0, 1.0));
        const double w = weight_[i];
        tsdf_[i] = static_cast<float>((w * tsdf_[i] + value) / (w + 1.0));
        weight_[i] = static_cast<float>(std::min(w + 1.0, max_w));
      }
    }
  }
}

PointCloud TsdfVolume::extract_points() const {
  PointCloud cloud;
  const std::size_t stride[3] = {1, static_cast<std::size_t>(dims_[0]),
                                 static_cast<std::size_t>(dims_[0]) * dims_[1]};
  for (int z = 0; z < dims_[2]; ++z) {
    for (int y = 0; y < dims_[1]; ++y) {
      for (int x = 0; x < dims_[0]; ++x) {
        const std::size_t i = index(x, y, z);
        if (weight_[i] <= 0.0f) continue;
        const float t1 = tsdf_[i];
        const int coord[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          if (coord[a] + 1 >= dims_[a]) continue;
          const std::size_t j = i + stride[a];
          if (weight_[j] <= 0.0f) continue;
          const float t2 = tsdf_[j];
          if ((t1 < 0.0f) == (t2 < 0.0f)) continue;
          const double frac = static_cast<double>(t1) / (static_cast<double>(t1) - t2);
          Vec3 p = voxel_center(x, y, z);
          p[a] += frac * voxel_size_;
          cloud.points.push_back(p);
        }
      }
    }
  }
  return cloud;
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  char b[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(b, sizeof(U));
}

template <typename T>
T get(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError("truncated volume dump", 0);
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) bits |= static_cast<U>(b[k]) << (8 * k);
  return std::bit_cast<T>(bits);
}

}  // namespace

void TsdfVolume::write_dump(std::ostream& out) const {
  for (int d : dims_) put<std::int32_t>(out, d);
  for (int a = 0; a < 3; ++a) put<double>(out, origin_[a]);
  put<double>(out, voxel_size_);
  for (float v : tsdf_) put<float>(out, v);
  for (float v : weight_) put<float>(out, v);
}

TsdfVolume TsdfVolume::read_dump(std::istream& in, const FusionParams& params) {
  TsdfVolume vol;
  vol.params_ = params;
  std::size_t n = 1;
  for (int& d : vol.dims_) {
    d = get<std::int32_t>(in);
    if (d < 2 || d > (1 << 16)) throw FormatError("bad volume dimensions", 0);
    n *= static_cast<std::size_t>(d);
  }
  for (int a = 0; a < 3; ++a) vol.origin_[a] = get<double>(in);
  vol.voxel_size_ = get<double>(in);
  vol.tsdf_.resize(n);
  vol.weight_.resize(n);
  for (float& v : vol.tsdf_) v = get<float>(in);
  for (float& v : vol.weight_) v = get<float>(in);
  return vol;
}

FusionDefaults default_fusion(const Aabb& target_bounds, int voxels_per_diagonal) {
  FusionDefaults d;
  d.voxel_size = target_bounds.diagonal() / voxels_per_diagonal;
  d.params.truncation = 3.0 * d.voxel_size;
  d.params.max_weight = 32.0;
  return d;
}

}  // namespace nbv
