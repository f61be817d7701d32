#pragma once

#include <cstddef>

#include "nbv/geometry.hpp"
#include "nbv/kdtree.hpp"

namespace nbv {

struct CoverageResult {
  double coverage_percent = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_gt = 0;
  double tau = 0.0;
};

/// Percentage of ground-truth points with a reconstruction point strictly
/// closer than tau. Throws on an empty ground truth or non-positive tau.
CoverageResult surface_coverage(const PointCloud& gt, const PointCloud& recon, double tau);

/// Same, against a prebuilt index over the reconstruction.
CoverageResult surface_coverage(const PointCloud& gt, const KdTree& recon, double tau);

/// Per-point flags of the same test, for subset statistics.
std::vector<bool> covered_points(const PointCloud& gt, const PointCloud& recon, double tau);

/// Default threshold: 1% of the ground-truth bounding-box diagonal.
double default_tau(const PointCloud& gt);

}  // namespace nbv
