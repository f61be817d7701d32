#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

#include "nbv/geometry.hpp"
#include "nbv/ray_accel.hpp"

namespace nbv {

/// Camera position about the target: azimuth and elevation in degrees,
/// distance in scene units.
struct SphericalPose {
  double theta = 0.0;
  double phi = 45.0;
  double psi = 125.0;

  bool operator==(const SphericalPose&) const = default;
};

/// Bounds and step sizes of the pose space. The step sizes double as the
/// continuous action range (each delta is clipped to +-step).
struct PoseLimits {
  double phi_min = 10.0;
  double phi_max = 80.0;
  double psi_min = 100.0;
  double psi_max = 125.0;
  double dtheta = 45.0;
  double dphi = 35.0;
  double dpsi = 25.0;

  /// Grid used by the discrete experiments: three elevation levels
  /// {10, 45, 80} and `distance_levels` distances starting at 100.
  static PoseLimits discrete(int distance_levels, double azimuth_step);

  std::vector<double> phi_levels() const;
  std::vector<double> psi_levels() const;
  int azimuth_bins() const;

  /// Throws nbv::ConfigError when steps are not positive, bounds are not
  /// ordered, or phi_max reaches the zenith.
  void validate() const;
  bool contains(const SphericalPose& pose) const;
};

enum class Action : int {
  kThetaUp = 0,
  kThetaDown = 1,
  kPhiUp = 2,
  kPhiDown = 3,
  kPsiUp = 4,
  kPsiDown = 5,
};
inline constexpr int kNumDiscreteActions = 6;

/// Wraps any angle into [0, 360).
double wrap_degrees(double deg);

struct PoseUpdate {
  SphericalPose pose;
  bool clamped = false;
};

/// Azimuth wraps; elevation and distance clamp at the limits.
PoseUpdate apply_discrete_action(const SphericalPose& pose, int action, const PoseLimits& limits);

/// Deltas are clipped to the action range first, then applied as in the
/// discrete case. `clamped` reports either kind of clipping.
PoseUpdate apply_continuous_action(const SphericalPose& pose, const Eigen::Vector3d& delta,
                                   const PoseLimits& limits);

/// World-to-camera transform. Camera axes: x right, y down, z forward.
struct Extrinsics {
  Vec3 position = Vec3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // rows: right, down, forward

  Vec3 forward() const { return rotation.row(2).transpose(); }
  Vec3 to_camera(const Vec3& world) const { return rotation * (world - position); }
};

Vec3 pose_position(const SphericalPose& pose, const Vec3& target);

/// Camera on the sphere around `target`, looking at it with world-up z.
/// Throws nbv::Error at the zenith, where the up vector is degenerate.
Extrinsics pose_to_camera(const SphericalPose& pose, const Vec3& target);

/// Camera at `position` looking at `target`.
Extrinsics look_at(const Vec3& position, const Vec3& target);

struct CameraModel {
  int width = 128;
  int height = 128;
  double fov_y_deg = 60.0;
  double max_range = std::numeric_limits<double>::infinity();

  void validate() const;
  double focal() const;
  /// Unit ray direction in camera coordinates through the pixel center.
  Vec3 pixel_ray(int u, int v) const;
  /// Nearest pixel for a camera-frame point in front of the camera.
  bool project(const Vec3& cam, int& u, int& v) const;
};

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  T& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  bool operator==(const Image&) const = default;
};

using GrayImage = Image<float>;
using DepthImage = Image<float>;

/// Depth value written for misses and out-of-range hits.
inline constexpr float kNoDepth = 0.0f;

inline constexpr double kAmbient = 0.1;

/// Default light travel direction (from above, front-left of the +x axis).
Vec3 default_light();

/// Per-pixel z-depth of the nearest hit.
DepthImage render_depth(const RayAccel& scene, const Extrinsics& camera, const CameraModel& model);

/// Shaded reflectance: albedo * (max(0, n . -light) + ambient), clipped to
/// [0, 1]; background pixels are 0.
GrayImage render_gray(const RayAccel& scene, const Extrinsics& camera, const CameraModel& model,
                      const Vec3& light = default_light());

/// ASCII PGM (P2), 8-bit quantized.
void write_pgm(std::ostream& out, const GrayImage& image);
/// Little-endian int32 width, int32 height, then row-major float32 depths.
void write_depth_dump(std::ostream& out, const DepthImage& image);
DepthImage read_depth_dump(std::istream& in);

}  // namespace nbv
