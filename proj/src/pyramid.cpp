#include "hba/pyramid.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hba/errors.hpp"
#include "hba/worker_pool.hpp"

namespace hba {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void validate_pyramid_config(const PyramidConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("pyramid: " + msg); };
  if (c.stride < 2 || c.stride >= c.window) fail("need 2 <= stride < window");
  if (c.workers < 1) fail("workers must be >= 1");
  if (c.layers < 0) fail("layers must be >= 0");
  if (!(c.theta_local > 0.0) || !(c.theta_global > 0.0)) fail("theta must be > 0");
  if (!(c.voxel_local > 0.0) || !(c.voxel_global > 0.0)) fail("voxel size must be > 0");
  if (c.min_points < 3) fail("min_points must be >= 3");
  if (c.max_depth < 0) fail("max_depth must be >= 0");
}

std::vector<WindowRef> partition_windows(int n_frames, int w, int s) {
  std::vector<WindowRef> windows;
  if (n_frames < w) {
    windows.push_back({0, n_frames});
    return windows;
  }
  const int j_max = (n_frames - w) / s;
  for (int j = 0; j <= j_max; ++j) windows.push_back({s * j, w});
  windows.back().length = n_frames - windows.back().start;  // absorb the tail
  return windows;
}

double predict_cost(double n_frames, int w, int s, int workers, int l) {
  if (l <= 1) return n_frames * n_frames * n_frames;
  double windowed = 0.0;
  for (int i = 1; i <= l - 1; ++i) windowed += n_frames / std::pow(s, i);
  windowed *= static_cast<double>(w) * w * w / workers;
  const double top = n_frames / std::pow(s, l - 1);
  return windowed + top * top * top;
}

int closed_form_l(double n_frames, int w, int s, int workers) {
  const double s3 = static_cast<double>(s) * s * s;
  const double w3 = static_cast<double>(w) * w * w;
  const double arg = 3.0 * n_frames * n_frames * (s3 - s) * workers / w3;
  if (!(arg > 1.0)) return 1;
  const int l = static_cast<int>(std::floor(0.5 * std::log(arg) / std::log(double(s)) + 1e-9));
  return std::max(1, l);
}

int select_layers(double n_frames, int w, int s, int workers) {
  if (n_frames < w) return 1;
  const int cap =
      1 + static_cast<int>(std::floor(std::log(n_frames / w) / std::log(double(s)) + 1e-9));
  int best_l = 1;
  double best = predict_cost(n_frames, w, s, workers, 1);
  for (int l = 2; l <= cap; ++l) {
    const double c = predict_cost(n_frames, w, s, workers, l);
    if (c < best) {
      best = c;
      best_l = l;
    }
  }
  return best_l;
}

Frame aggregate_keyframe(const std::vector<PlaneVoxel>& voxels, const WindowResult& result) {
  Frame kf;
  for (const PlaneVoxel& v : voxels) {
    for (std::size_t i = 0; i < v.frame_ids.size(); ++i) {
      const Pose& T = result.poses.at(static_cast<std::size_t>(v.frame_ids[i]));
      for (const Vec3& p : v.points[i]) kf.points.push_back(T.act(p));
    }
  }
  return kf;
}

Pyramid build_pyramid(std::span<const Frame> frames, const Trajectory& init,
                      const PyramidConfig& config, const BaParams& ba) {
  validate_pyramid_config(config);
  if (frames.size() != init.size())
    throw LengthMismatch("pyramid: " + std::to_string(frames.size()) + " frames vs " +
                         std::to_string(init.size()) + " poses");
  if (init.size() < 2) throw ConfigError("pyramid: need at least two frames");

  const int w = config.window;
  const int s = config.stride;
  int planned = config.layers > 0
                    ? config.layers
                    : select_layers(static_cast<double>(init.size()), w, s, config.workers);

  // Clamp to levels that keep at least two frames entering the top solve.
  {
    int n = static_cast<int>(init.size());
    int feasible = 1;
    for (int l = 2; l <= planned; ++l) {
      n = static_cast<int>(partition_windows(n, w, s).size());
      if (n < 2) break;
      feasible = l;
    }
    planned = feasible;
  }

  VoxelMapParams local_params;
  local_params.voxel_size = config.voxel_local;
  local_params.plane_theta = config.theta_local;
  local_params.min_points = config.min_points;
  local_params.max_depth = config.max_depth;
  VoxelMapParams global_params = local_params;
  global_params.voxel_size = config.voxel_global;
  global_params.plane_theta = config.theta_global;

  Pyramid pyr;
  std::vector<Frame> owned;  // keyframes backing `cur` above level one
  std::span<const Frame> cur = frames;
  Trajectory cur_poses = init;

  for (int level = 1; level <= planned; ++level) {
    const bool top = level == planned;
    PyramidLayer layer;
    layer.n_frames = static_cast<int>(cur.size());
    layer.poses = cur_poses;
    layer.windows = top ? std::vector<WindowRef>{{0, layer.n_frames}}
                        : partition_windows(layer.n_frames, w, s);
    const std::size_t n_win = layer.windows.size();
    layer.results.resize(n_win);
    std::vector<Frame> keyframes(top ? 0 : n_win);
    std::vector<double> t_voxel(n_win, 0.0), t_ba(n_win, 0.0);

    parallel_for(config.workers, n_win, [&](std::size_t j) {
      const WindowRef& win = layer.windows[j];
      const std::size_t b = static_cast<std::size_t>(win.start);
      const std::size_t len = static_cast<std::size_t>(win.length);
      Trajectory local(len);
      local[0] = Pose();
      for (std::size_t k = 1; k < len; ++k) local[k] = relative(cur_poses[b], cur_poses[b + k]);

      // Voxel membership is decided in the global frame so the grid stays
      // aligned with the map; the solve itself runs on anchor-relative poses
      // (the eigenvalue cost does not depend on the grouping frame).
      const Trajectory global_slice(cur_poses.begin() + static_cast<std::ptrdiff_t>(b),
                                    cur_poses.begin() + static_cast<std::ptrdiff_t>(b + len));
      auto t0 = std::chrono::steady_clock::now();
      const std::vector<PlaneVoxel> voxels = build_adaptive_map(
          cur.subspan(b, len), global_slice, top ? global_params : local_params);
      t_voxel[j] = seconds_since(t0);

      t0 = std::chrono::steady_clock::now();
      WindowResult res;
      if (voxels.empty()) {
        res.poses = local;
        res.hessian = MatX::Zero(6 * (static_cast<Eigen::Index>(len) - 1),
                                 6 * (static_cast<Eigen::Index>(len) - 1));
        res.no_features = true;
        std::fprintf(stderr,
                     "warning: level %d window %zu has no plane features; "
                     "keeping its input poses\n",
                     level, j);
      } else {
        res = solve_window(voxels, local, ba);
      }
      t_ba[j] = seconds_since(t0);
      if (!top) keyframes[j] = aggregate_keyframe(voxels, res);
      layer.results[j] = std::move(res);
    });

    for (std::size_t j = 0; j < n_win; ++j) {
      pyr.t_voxel_s += t_voxel[j];
      pyr.t_ba_s += t_ba[j];
    }

    if (top) {
      pyr.top_cost = layer.results[0].final_cost;
      pyr.layers.push_back(std::move(layer));
      break;
    }

    // Next level's poses: chain each window's optimized anchor-to-anchor
    // relative onto the previous keyframe pose.
    Trajectory next_poses(n_win);
    next_poses[0] = cur_poses[0];
    for (std::size_t j = 1; j < n_win; ++j)
      next_poses[j] =
          compose(next_poses[j - 1], layer.results[j - 1].poses[static_cast<std::size_t>(s)]);
    for (std::size_t j = 0; j < n_win; ++j) keyframes[j].pose = next_poses[j];

    pyr.layers.push_back(std::move(layer));
    owned = std::move(keyframes);
    cur = owned;
    cur_poses = std::move(next_poses);
  }
  return pyr;
}

}  // namespace hba
