#pragma once

#include <vector>

#include "hba/frame.hpp"
#include "hba/geometry.hpp"

namespace hba {

struct AteResult {
  double rot_rmse_deg = 0.0;
  double trans_rmse_m = 0.0;
  std::vector<double> rot_errors_deg;  // per-frame geodesic angles
  std::vector<double> trans_errors_m;  // per-frame distances after alignment
  Pose alignment;                      // rigid transform applied to the estimate
};

// Absolute trajectory error. The estimate is first aligned to the ground
// truth by the least-squares rigid transform over translations (no scale;
// identity rotation when the translations carry no spread), then per-frame
// rotation geodesic and translation distance are reduced to RMSEs.
// Throws LengthMismatch when the trajectories differ in length or are empty.
AteResult ate(const Trajectory& estimate, const Trajectory& ground_truth);

// Mean map entropy: for every point with at least 10 neighbors within
// radius (the point itself included), the entropy of the neighborhood
// covariance h = 0.5 ln det(2 pi e (Sigma + 1e-12 I)); the score is the mean
// over qualifying points, lower = crisper map. Points with fewer neighbors
// are skipped; DegenerateMap if every point is skipped. Neighbor lookups use
// a uniform grid with cells of the given radius; workers parallelize the
// per-point entropies with a fixed-order mean.
double mme(const std::vector<Vec3>& points, double radius = 0.5, int workers = 1);

}  // namespace hba
