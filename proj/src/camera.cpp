#include "nbv/camera.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "nbv/error.hpp"

namespace nbv {

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr double kLimitTol = 1e-9;

}  // namespace

PoseLimits PoseLimits::discrete(int distance_levels, double azimuth_step) {
  if (distance_levels < 1) throw ConfigError("distance levels must be at least 1");
  PoseLimits l;
  l.phi_min = 10.0;
  l.phi_max = 80.0;
  l.dphi = 35.0;
  l.psi_min = 100.0;
  l.dpsi = 25.0;
  l.psi_max = l.psi_min + l.dpsi * (distance_levels - 1);
  l.dtheta = azimuth_step;
  l.validate();
  return l;
}

std::vector<double> PoseLimits::phi_levels() const {
  std::vector<double> out;
  for (double p = phi_min; p <= phi_max + kLimitTol; p += dphi) out.push_back(p);
  return out;
}

std::vector<double> PoseLimits::psi_levels() const {
  std::vector<double> out;
  for (double p = psi_min; p <= psi_max + kLimitTol; p += dpsi) out.push_back(p);
  return out;
}

int PoseLimits::azimuth_bins() const { return static_cast<int>(std::lround(360.0 / dtheta)); }

void PoseLimits::validate() const {
  if (!(dtheta > 0 && dphi > 0 && dpsi > 0)) throw ConfigError("pose limits: step sizes must be positive");
  if (!(phi_min <= phi_max)) throw ConfigError("pose limits: phi bounds not ordered");
  if (!(psi_min <= psi_max)) throw ConfigError("pose limits: psi bounds not ordered");
  if (!(psi_min > 0)) throw ConfigError("pose limits: distances must be positive");
  if (!(phi_max < 90.0 && phi_min > -90.0)) throw ConfigError("pose limits: elevation must stay off the poles");
}

bool PoseLimits::contains(const SphericalPose& p) const {
  return p.theta >= 0.0 && p.theta < 360.0 && p.phi >= phi_min - kLimitTol && p.phi <= phi_max + kLimitTol &&
         p.psi >= psi_min - kLimitTol && p.psi <= psi_max + kLimitTol;
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

namespace {

// Clamps `value` to [lo, hi] and reports whether clamping was needed. Values
// within tolerance of a bound snap to it without counting as clamped.
double clamp_axis(double value, double lo, double hi, bool& clamped) {
  if (value < lo - kLimitTol) {
    clamped = true;
    return lo;
  }
  if (value > hi + kLimitTol) {
    clamped = true;
    return hi;
  }
  return std::clamp(value, lo, hi);
}

}  // namespace

PoseUpdate apply_discrete_action(const SphericalPose& pose, int action, const PoseLimits& limits) {
  if (action < 0 || action >= kNumDiscreteActions) {
    throw Error("discrete action " + std::to_string(action) + " outside 0..5");
  }
  Eigen::Vector3d delta = Eigen::Vector3d::Zero();
  const double sign = action % 2 == 0 ? 1.0 : -1.0;
  const double step[3] = {limits.dtheta, limits.dphi, limits.dpsi};
  delta[action / 2] = sign * step[action / 2];

  PoseUpdate out{pose, false};
  out.pose.theta = wrap_degrees(pose.theta + delta[0]);
  const double phi = clamp_axis(pose.phi + delta[1], limits.phi_min, limits.phi_max, out.clamped);
  const double psi = clamp_axis(pose.psi + delta[2], limits.psi_min, limits.psi_max, out.clamped);
  if (out.clamped && (action / 2) != 0) {
    // A move that runs into a bound from the bound leaves the pose unchanged.
    const bool at_bound = (action / 2 == 1) ? (phi == pose.phi) : (psi == pose.psi);
    if (at_bound) return {pose, true};
  }
  out.pose.phi = phi;
  out.pose.psi = psi;
  return out;
}

PoseUpdate apply_continuous_action(const SphericalPose& pose, const Eigen::Vector3d& delta,
                                   const PoseLimits& limits) {
  PoseUpdate out{pose, false};
  const double range[3] = {limits.dtheta, limits.dphi, limits.dpsi};
  Eigen::Vector3d d;
  for (int i = 0; i < 3; ++i) {
    const double v = std::isfinite(delta[i]) ? delta[i] : 0.0;
    d[i] = clamp_axis(v, -range[i], range[i], out.clamped);
  }
  out.pose.theta = wrap_degrees(pose.theta + d[0]);
  out.pose.phi = clamp_axis(pose.phi + d[1], limits.phi_min, limits.phi_max, out.clamped);
  out.pose.psi = clamp_axis(pose.psi + d[2], limits.psi_min, limits.psi_max, out.clamped);
  return out;
}

Vec3 pose_position(const SphericalPose& pose, const Vec3& target) {
  const double th = pose.theta * kDeg;
  const double ph = pose.phi * kDeg;
  return target + pose.psi * Vec3(std::cos(ph) * std::cos(th), std::cos(ph) * std::sin(th), std::sin(ph));
}

Extrinsics look_at(const Vec3& position, const Vec3& target) {
  const Vec3 forward = (target - position).normalized();
  const Vec3 side = forward.cross(Vec3::UnitZ());
  if (side.norm() < 1e-9) throw Error("look_at: view direction parallel to world up");
  const Vec3 right = side.normalized();
  const Vec3 down = forward.cross(right);
  Extrinsics e;
  e.position = position;
  e.rotation.row(0) = right.transpose();
  e.rotation.row(1) = down.transpose();
  e.rotation.row(2) = forward.transpose();
  return e;
}

Extrinsics pose_to_camera(const SphericalPose& pose, const Vec3& target) {
  if (!(pose.psi > 0.0) || !std::isfinite(pose.theta) || !std::isfinite(pose.phi)) {
    throw Error("pose_to_camera: invalid pose");
  }
  if (std::abs(std::abs(pose.phi) - 90.0) < 1e-9) throw Error("pose_to_camera: degenerate up vector at the zenith");
  return look_at(pose_position(pose, target), target);
}

void CameraModel::validate() const {
  if (width < 16 || height < 16) throw ConfigError("camera: image must be at least 16x16");
  if (!(fov_y_deg >= 10.0 && fov_y_deg <= 170.0)) throw ConfigError("camera: fov outside [10, 170] degrees");
  if (!(max_range > 0.0)) throw ConfigError("camera: max range must be positive");
}

double CameraModel::focal() const { return 0.5 * height / std::tan(0.5 * fov_y_deg * kDeg); }

Vec3 CameraModel::pixel_ray(int u, int v) const {
  const double f = focal();
  return Vec3((u + 0.5 - 0.5 * width) / f, (v + 0.5 - 0.5 * height) / f, 1.0).normalized();
}

bool CameraModel::project(const Vec3& cam, int& u, int& v) const {
  if (cam.z() <= 0.0) return false;
  const double f = focal();
  const double x = f * cam.x() / cam.z() + 0.5 * width;
  const double y = f * cam.y() / cam.z() + 0.5 * height;
  if (!(x >= 0.0 && y >= 0.0 && x < width && y < height)) return false;
  u = static_cast<int>(x);
  v = static_cast<int>(y);
  return true;
}

Vec3 default_light() { return Vec3(-0.45, -0.3, -0.84).normalized(); }

DepthImage render_depth(const RayAccel& scene, const Extrinsics& camera, const CameraModel& model) {
  model.validate();
  DepthImage img(model.width, model.height, kNoDepth);
  const Eigen::Matrix3d cam_to_world = camera.rotation.transpose();
  for (int v = 0; v < model.height; ++v) {
    for (int u = 0; u < model.width; ++u) {
      const Vec3 ray_cam = model.pixel_ray(u, v);
      const Vec3 dir = (cam_to_world * ray_cam).normalized();
      const auto hit = scene.raycast(camera.position, dir);
      if (!hit) continue;
      const double z = hit->t * ray_cam.z();
      if (z > model.max_range) continue;
      img.at(u, v) = static_cast<float>(z);
    }
  }
  return img;
}

GrayImage render_gray(const RayAccel& scene, const Extrinsics& camera, const CameraModel& model, const Vec3& light) {
  model.validate();
  GrayImage img(model.width, model.height, 0.0f);
  const Eigen::Matrix3d cam_to_world = camera.rotation.transpose();
  const std::vector<double>& albedo = scene.mesh().face_albedo();
  for (int v = 0; v < model.height; ++v) {
    for (int u = 0; u < model.width; ++u) {
      const Vec3 dir = (cam_to_world * model.pixel_ray(u, v)).normalized();
      const auto hit = scene.raycast(camera.position, dir);
      if (!hit) continue;
      const double lambert = std::max(0.0, hit->normal.dot(-light));
      const double shade = albedo[hit->face] * (lambert + kAmbient);
      img.at(u, v) = static_cast<float>(std::clamp(shade, 0.0, 1.0));
    }
  }
  return img;
}

void write_pgm(std::ostream& out, const GrayImage& image) {
  out << "P2\n" << image.width << ' ' << image.height << "\n255\n";
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      const double g = std::clamp(static_cast<double>(image.at(u, v)), 0.0, 1.0);
      out << std::lround(g * 255.0) << (u + 1 == image.width ? '\n' : ' ');
    }
  }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t x) {
  const char b[4] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff),
                     static_cast<char>((x >> 16) & 0xff), static_cast<char>((x >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated depth dump", 0);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_depth_dump(std::ostream& out, const DepthImage& image) {
  put_u32(out, static_cast<std::uint32_t>(image.width));
  put_u32(out, static_cast<std::uint32_t>(image.height));
  for (float d : image.data) put_u32(out, std::bit_cast<std::uint32_t>(d));
}

DepthImage read_depth_dump(std::istream& in) {
  const auto w = static_cast<int>(get_u32(in));
  const auto h = static_cast<int>(get_u32(in));
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) throw FormatError("bad depth dump dimensions", 0);
  DepthImage img(w, h);
  for (float& d : img.data) d = std::bit_cast<float>(get_u32(in));
  return img;
}

}  // namespace nbv
