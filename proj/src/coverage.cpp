#include "nbv/coverage.hpp"

#include "nbv/error.hpp"

namespace nbv {

namespace {

void check_inputs(const PointCloud& gt, double tau) {
  if (gt.empty()) throw Error("surface_coverage: empty ground truth");
  if (!(tau > 0.0)) throw Error("surface_coverage: tau must be positive");
}

}  // namespace

CoverageResult surface_coverage(const PointCloud& gt, const KdTree& recon, double tau) {
  check_inputs(gt, tau);
  CoverageResult r;
  r.n_gt = gt.size();
  r.tau = tau;
  for (const Vec3& g : gt.points) {
    if (recon.any_within(g, tau)) ++r.n_obs;
  }
  r.coverage_percent = 100.0 * static_cast<double>(r.n_obs) / static_cast<double>(r.n_gt);
  return r;
}

CoverageResult surface_coverage(const PointCloud& gt, const PointCloud& recon, double tau) {
  check_inputs(gt, tau);
  return surface_coverage(gt, KdTree(recon.points), tau);
}

std::vector<bool> covered_points(const PointCloud& gt, const PointCloud& recon, double tau) {
  check_inputs(gt, tau);
  const KdTree index(recon.points);
  std::vector<bool> out(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) out[i] = index.any_within(gt.points[i], tau);
  return out;
}

double default_tau(const PointCloud& gt) { return 0.01 * bounding_box(gt).diagonal(); }

}  // namespace nbv
