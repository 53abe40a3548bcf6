#include "hba/voxel_map.hpp"

#include <cmath>
#include <map>

#include "hba/errors.hpp"

namespace hba {

namespace {

struct BuildNode {
  VoxelKey key;
  Vec3 center = Vec3::Zero();
  double half = 0.0;
  // Parallel per-frame point lists, dense over the window's frames.
  std::vector<std::vector<Vec3>> local;
  std::vector<std::vector<Vec3>> global;
  std::int64_t total = 0;
};

void retain(BuildNode& node, std::vector<PlaneVoxel>& out) {
  PlaneVoxel v;
  v.key = node.key;
  PointCluster merged;
  for (std::size_t f = 0; f < node.local.size(); ++f) {
    if (node.local[f].empty()) continue;
    v.frame_ids.push_back(static_cast<int>(f));
    PointCluster c;
    for (const Vec3& p : node.local[f]) c.push(p);
    v.clusters.push_back(c);
    v.points.push_back(std::move(node.local[f]));
    for (const Vec3& g : node.global[f]) merged.push(g);
  }
  v.merged_global = merged;
  out.push_back(std::move(v));
}

void recurse(BuildNode& node, const VoxelMapParams& params, std::vector<PlaneVoxel>& out) {
  if (node.total < params.min_points) return;

  PointCluster merged;
  for (const auto& pts : node.global)
    for (const Vec3& g : pts) merged.push(g);
  if (plane_test(merged.scatter(), params.plane_theta)) {
    retain(node, out);
    return;
  }
  if (node.key.depth >= params.max_depth) return;

  const std::size_t n_frames = node.local.size();
  std::array<BuildNode, 8> children;
  for (int c = 0; c < 8; ++c) {
    BuildNode& ch = children[c];
    ch.key.depth = node.key.depth + 1;
    ch.half = 0.5 * node.half;
    for (int a = 0; a < 3; ++a) {
      const int bit = (c >> a) & 1;
      ch.key.cell[a] = 2 * node.key.cell[a] + bit;
      ch.center(a) = node.center(a) + (bit == 0 ? -ch.half : ch.half);
    }
    ch.local.resize(n_frames);
    ch.global.resize(n_frames);
  }
  for (std::size_t f = 0; f < n_frames; ++f) {
    for (std::size_t i = 0; i < node.global[f].size(); ++i) {
      const Vec3& g = node.global[f][i];
      const int c = (g.x() >= node.center.x() ? 1 : 0) | (g.y() >= node.center.y() ? 2 : 0) |
                    (g.z() >= node.center.z() ? 4 : 0);
      children[c].local[f].push_back(node.local[f][i]);
      children[c].global[f].push_back(g);
      ++children[c].total;
    }
    node.local[f].clear();
    node.global[f].clear();
  }
  for (int c = 0; c < 8; ++c) recurse(children[c], params, out);
}

}  // namespace

bool plane_test(const Mat3& scatter, double theta) {
  const Eig3 e = sym_eig3(scatter);
  if (e.values(2) < 1e-12) return false;
  const double lo = std::max(e.values(0), 0.0);
  return lo / e.values(2) < theta;
}

PointCluster merge_into_global(const PlaneVoxel& voxel, const Trajectory& poses) {
  PointCluster merged;
  for (std::size_t i = 0; i < voxel.frame_ids.size(); ++i) {
    const int f = voxel.frame_ids[i];
    if (f < 0 || static_cast<std::size_t>(f) >= poses.size())
      throw MissingPose("voxel references frame " + std::to_string(f) + " outside the pose set");
    merged.merge(voxel.clusters[i].transformed(poses[f]));
  }
  return merged;
}

std::vector<PlaneVoxel> build_adaptive_map(std::span<const Frame> frames,
                                           const Trajectory& poses,
                                           const VoxelMapParams& params) {
  if (poses.size() != frames.size())
    throw LengthMismatch("frame and pose counts differ in voxelization");
  if (!(params.voxel_size > 0.0) || !(params.plane_theta > 0.0))
    throw ConfigError("voxel size and plane threshold must be positive");

  const double V = params.voxel_size;
  std::map<std::array<std::int64_t, 3>, BuildNode> roots;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const Vec3& p : frames[f].points) {
      const Vec3 g = poses[f].act(p);
      std::array<std::int64_t, 3> cell;
      for (int a = 0; a < 3; ++a) cell[a] = static_cast<std::int64_t>(std::floor(g(a) / V));
      BuildNode& node = roots[cell];
      if (node.local.empty()) {
        node.key.cell = cell;
        node.key.depth = 0;
        node.half = 0.5 * V;
        for (int a = 0; a < 3; ++a)
          node.center(a) = (static_cast<double>(cell[a]) + 0.5) * V;
        node.local.resize(frames.size());
        node.global.resize(frames.size());
      }
      node.local[f].push_back(p);
      node.global[f].push_back(g);
      ++node.total;
    }
  }

  std::vector<PlaneVoxel> out;
  for (auto& [cell, node] : roots) recurse(node, params, out);
  return out;
}

}  // namespace hba
