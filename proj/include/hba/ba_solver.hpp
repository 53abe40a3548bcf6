#pragma once

#include <vector>

#include "hba/voxel_map.hpp"

namespace hba {

struct BaParams {
  int max_iter = 10;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_dn = 10.0;
  double grad_tol = 1e-7;
  double step_tol = 1e-8;
  // When > 0, the damped solve keeps only pose-index-aligned diagonal blocks
  // of this many poses and zeroes every other coupling. Cost, gradient and
  // convergence checks are unaffected; only the step computation degrades.
  int block_diag_stride = 0;
};

struct BaLinearization {
  double cost = 0.0;
  VecX grad;      // 6*(n-1); pose 0 is the fixed anchor
  MatX hessian;   // 6*(n-1) square, same ordering
  int eigengap_skips = 0;
};

struct WindowResult {
  Trajectory poses;  // window-local optimized poses, poses[0] == identity
  MatX hessian;      // evaluated at the final poses, anchor excluded
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> cost_history;  // cost before any step, then after each iteration
  int eigengap_skips = 0;
  bool grad_converged = false;
  bool step_converged = false;
  bool no_features = false;
};

// Sum over voxels of the smallest scatter eigenvalue of the merged global
// cluster: the mean-square point-to-plane residual of each cell.
double ba_cost(const std::vector<PlaneVoxel>& voxels, const Trajectory& poses);

// Analytic gradient and Hessian of ba_cost with respect to right-multiplied
// twist perturbations of poses 1..n-1 (pose 0 anchored). Everything is
// computed from the per-frame cluster statistics; raw points are never
// touched. Voxels whose two smallest eigenvalues are separated by less than
// 1e-10 * lambda3 are skipped for the call and counted in eigengap_skips.
BaLinearization ba_gradient_hessian(const std::vector<PlaneVoxel>& voxels,
                                    const Trajectory& poses);

// Levenberg-Marquardt on the window. init supplies the initial window-local
// poses (init[0] must be identity); at least one voxel is required
// (NoFeatures otherwise). Accepted costs never increase.
WindowResult solve_window(const std::vector<PlaneVoxel>& voxels, const Trajectory& init,
                          const BaParams& params);

// Covariance of the free poses: (H + eps I)^-1 with eps = 1e-6 tr(H)/dim.
MatX window_covariance(const WindowResult& result);

// Information matrix of the relative pose between window poses j and j+1,
// propagated to first order from the pose covariance. Falls back to a scaled
// identity (with a stderr warning) if the result is not positive definite.
Mat6 relative_pose_information(const WindowResult& result, int j);
Mat6 relative_pose_information(const WindowResult& result, const MatX& cov, int j);

}  // namespace hba
