#include "hba/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "hba/errors.hpp"
#include "hba/geometry.hpp"
#include "hba/voxel_map.hpp"

namespace hba {
namespace {

// Below this the top-layer cost is summation noise of a 1e5-point merge, not
// structure; further passes only re-run the same fixed point.
constexpr double kAbsCostFloor = 1e-10;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Peak resident set of the process in MB (VmHWM), 0 when unavailable.
double peak_rss_mb() {
  std::ifstream status("/proc/self/status");
  std::string key;
  while (status >> key) {
    if (key == "VmHWM:") {
      double kb = 0.0;
      status >> kb;
      return kb / 1024.0;
    }
    status.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return 0.0;
}

void validate_inputs(std::span<const Frame> frames, const Trajectory& trajectory,
                     const PipelineConfig& config) {
  if (frames.size() != trajectory.size())
    throw LengthMismatch("pipeline: " + std::to_string(frames.size()) + " frames vs " +
                         std::to_string(trajectory.size()) + " poses");
  if (trajectory.size() < 2) throw LengthMismatch("pipeline: need at least two frames");
  if (config.max_passes < 1) throw ConfigError("pipeline: max_passes must be >= 1");
  if (!(config.rel_cost_tol >= 0.0)) throw ConfigError("pipeline: rel_cost_tol must be >= 0");
  for (const Pose& p : trajectory)
    if (!p.R.allFinite() || !p.t.allFinite())
      throw NonRigidRotation("pipeline: non-finite input pose");
}

VoxelMapParams local_map_params(const PipelineConfig& config) {
  VoxelMapParams vp;
  vp.voxel_size = config.pyramid.voxel_local;
  vp.plane_theta = config.pyramid.theta_local;
  vp.min_points = config.pyramid.min_points;
  vp.max_depth = config.pyramid.max_depth;
  return vp;
}

// One bundle adjustment window over the whole trajectory. The map is built in
// the global frame; the solve runs anchor-relative and is composed back.
Trajectory whole_trajectory_ba(std::span<const Frame> frames, const Trajectory& trajectory,
                               const PipelineConfig& config, int block_diag_stride) {
  validate_inputs(frames, trajectory, config);
  validate_pyramid_config(config.pyramid);
  const std::vector<PlaneVoxel> voxels =
      build_adaptive_map(frames, trajectory, local_map_params(config));
  Trajectory local(trajectory.size());
  for (std::size_t k = 0; k < trajectory.size(); ++k)
    local[k] = relative(trajectory[0], trajectory[k]);
  BaParams ba = config.ba;
  ba.block_diag_stride = block_diag_stride;
  const WindowResult res = solve_window(voxels, local, ba);
  Trajectory out(trajectory.size());
  for (std::size_t k = 0; k < trajectory.size(); ++k)
    out[k] = compose(trajectory[0], res.poses[k]);
  return out;
}

}  // namespace

RunResult run(std::span<const Frame> frames, const Trajectory& trajectory,
              const PipelineConfig& config) {
  validate_inputs(frames, trajectory, config);
  validate_pyramid_config(config.pyramid);

  RunResult out;
  out.trajectory = trajectory;
  double prev_cost = 0.0;
  for (int pass = 1; pass <= config.max_passes; ++pass) {
    Pyramid pyr;
    try {
      pyr = build_pyramid(frames, out.trajectory, config.pyramid, config.ba);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = "pass " + std::to_string(pass) + " failed in pyramid: " + e.what();
      return out;
    }

    PgResult pg;
    double t_pg = 0.0;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const FactorGraph graph = build_graph(pyr, config.pyramid.stride);
      PgParams pgp = config.pg;
      pgp.workers = config.pyramid.workers;
      pg = optimize(graph, pgp);
      t_pg = seconds_since(t0);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = "pass " + std::to_string(pass) + " failed in pose graph: " + e.what();
      return out;
    }
    out.trajectory = pg.poses;

    PassReport rep;
    rep.pass = pass;
    rep.cost_ba = pyr.top_cost;
    rep.cost_pg = pg.final_cost;
    rep.t_voxel_s = pyr.t_voxel_s;
    rep.t_ba_s = pyr.t_ba_s;
    rep.t_pg_s = t_pg;
    rep.rss_mb_estimate = peak_rss_mb();
    out.reports.push_back(rep);

    if (rep.cost_ba < kAbsCostFloor) break;
    if (pass >= 2 &&
        (prev_cost - rep.cost_ba) / std::max(prev_cost, kAbsCostFloor) < config.rel_cost_tol)
      break;
    prev_cost = rep.cost_ba;
  }
  return out;
}

Trajectory run_original_ba(std::span<const Frame> frames, const Trajectory& trajectory,
                           const PipelineConfig& config) {
  return whole_trajectory_ba(frames, trajectory, config, 0);
}

Trajectory run_reduced_ba(std::span<const Frame> frames, const Trajectory& trajectory,
                          const PipelineConfig& config) {
  return whole_trajectory_ba(frames, trajectory, config, config.pyramid.stride);
}

Trajectory run_direct_assign(std::span<const Frame> frames, const Trajectory& trajectory,
                             const PipelineConfig& config) {
  validate_inputs(frames, trajectory, config);
  validate_pyramid_config(config.pyramid);
  const Pyramid pyr = build_pyramid(frames, trajectory, config.pyramid, config.ba);

  const PyramidLayer& top = pyr.layers.back();
  Trajectory upper(top.n_frames);
  for (int k = 0; k < top.n_frames; ++k)
    upper[k] = compose(top.poses[0], top.results[0].poses[k]);

  // Each keyframe pose overwrites the first stride poses of its window,
  // composed with the window's optimized relatives; the last window covers
  // its whole span. Window starts are stride-spaced, so every frame is
  // written exactly once.
  for (int li = static_cast<int>(pyr.layers.size()) - 2; li >= 0; --li) {
    const PyramidLayer& layer = pyr.layers[li];
    Trajectory lower(layer.n_frames);
    for (std::size_t j = 0; j < layer.windows.size(); ++j) {
      const WindowRef& w = layer.windows[j];
      const WindowResult& res = layer.results[j];
      const int count =
          (j + 1 == layer.windows.size()) ? w.length : config.pyramid.stride;
      for (int k = 0; k < count; ++k)
        lower[w.start + k] = compose(upper[j], res.poses[k]);
    }
    upper = std::move(lower);
  }
  return upper;
}

void write_reports(std::ostream& out, const std::vector<PassReport>& reports) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << "pass,cost_ba,cost_pg,t_voxel_s,t_ba_s,t_pg_s,rss_mb_estimate\n";
  out.precision(12);
  for (const PassReport& r : reports)
    out << r.pass << ',' << r.cost_ba << ',' << r.cost_pg << ',' << r.t_voxel_s << ','
        << r.t_ba_s << ',' << r.t_pg_s << ',' << r.rss_mb_estimate << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace hba
