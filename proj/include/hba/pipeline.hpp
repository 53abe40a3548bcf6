#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hba/ba_solver.hpp"
#include "hba/frame.hpp"
#include "hba/pose_graph.hpp"
#include "hba/pyramid.hpp"

namespace hba {

enum class PipelineMode { Hierarchical, OriginalBa, ReducedBa, DirectAssign };

struct PipelineConfig {
  PyramidConfig pyramid;
  BaParams ba;
  PgParams pg;
  int max_passes = 5;
  double rel_cost_tol = 1e-3;
  PipelineMode mode = PipelineMode::Hierarchical;
};

struct PassReport {
  int pass = 0;
  double cost_ba = 0.0;  // top-layer BA cost of the pass
  double cost_pg = 0.0;  // pose-graph cost after optimization
  double t_voxel_s = 0.0;
  double t_ba_s = 0.0;
  double t_pg_s = 0.0;
  double rss_mb_estimate = 0.0;  // process peak RSS when the pass ended
};

struct RunResult {
  Trajectory trajectory;
  std::vector<PassReport> reports;
  bool failed = false;
  std::string error;  // stage-labeled message when a pass failed
};

// Alternating refinement: {pyramid bottom-up -> factor graph -> pose-graph
// optimization -> poses written back} until the top-layer BA cost stalls
// (absolute floor 1e-12, or relative decrease below rel_cost_tol from the
// second pass on) or max_passes is exhausted. Input validation errors throw;
// an error inside a pass stops the loop and returns the last good trajectory
// with the stage recorded in `error`.
RunResult run(std::span<const Frame> frames, const Trajectory& trajectory,
              const PipelineConfig& config);

// Baseline: one bundle adjustment window spanning the entire trajectory,
// using the local-layer voxel parameters; no pyramid, no graph.
Trajectory run_original_ba(std::span<const Frame> frames, const Trajectory& trajectory,
                           const PipelineConfig& config);

// Baseline: original-BA assembly, but the damped linear system keeps only
// stride-sized diagonal blocks of the Hessian.
Trajectory run_reduced_ba(std::span<const Frame> frames, const Trajectory& trajectory,
                          const PipelineConfig& config);

// Baseline: bottom-up pyramid as usual, then each upper-layer pose directly
// overwrites the poses of its window (first stride frames; the last window
// overwrites all of its frames), recursively down to layer 1. No graph.
Trajectory run_direct_assign(std::span<const Frame> frames, const Trajectory& trajectory,
                             const PipelineConfig& config);

// One CSV row per pass: pass, cost_ba, cost_pg, t_voxel_s, t_ba_s, t_pg_s,
// rss_mb_estimate. Header line included.
void write_reports(std::ostream& out, const std::vector<PassReport>& reports);

}  // namespace hba
