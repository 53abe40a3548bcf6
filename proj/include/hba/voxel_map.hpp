#pragma once

#include <array>
#include <span>
#include <vector>

#include "hba/frame.hpp"
#include "hba/point_cluster.hpp"

namespace hba {

// Cell address in the adaptive grid. Root cells (depth 0) tile space as
// [k*V, (k+1)*V) per axis, anchored at the global origin with floor division;
// each depth halves the cell.
struct VoxelKey {
  std::array<std::int64_t, 3> cell = {0, 0, 0};
  int depth = 0;

  bool operator==(const VoxelKey&) const = default;
};

// One retained planar cell. Per-frame statistics and raw points stay in each
// frame's local coordinates; frame_ids indexes into the window the map was
// built from. merged_global caches the merged cluster at the build poses.
struct PlaneVoxel {
  VoxelKey key;
  std::vector<int> frame_ids;
  std::vector<PointCluster> clusters;
  std::vector<std::vector<Vec3>> points;
  PointCluster merged_global;
};

struct VoxelMapParams {
  double voxel_size = 4.0;
  double plane_theta = 0.1;
  int min_points = 20;
  int max_depth = 3;
};

// Planarity: smallest over largest scatter eigenvalue below theta. A scatter
// with lambda3 < 1e-12 carries no usable extent and never counts as planar.
bool plane_test(const Mat3& scatter, double theta);

// Merge the voxel's per-frame clusters under the given poses (indexed by
// frame id). Equivalent to transforming every raw point and accumulating.
PointCluster merge_into_global(const PlaneVoxel& voxel, const Trajectory& poses);

// Adaptive voxelization: points of all frames are binned into root cells
// under the given global poses; cells failing the plane test split into 8
// children until max_depth. Cells below min_points, and non-planar cells at
// max_depth, are discarded. Output order is deterministic (sorted roots,
// depth-first children) and independent of caller threading.
std::vector<PlaneVoxel> build_adaptive_map(std::span<const Frame> frames,
                                           const Trajectory& poses,
                                           const VoxelMapParams& params);

}  // namespace hba
