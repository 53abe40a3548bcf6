#pragma once

#include <span>
#include <vector>

#include "hba/ba_solver.hpp"
#include "hba/frame.hpp"
#include "hba/voxel_map.hpp"

namespace hba {

struct PyramidConfig {
  int window = 10;
  int stride = 5;
  int workers = 8;
  int layers = 0;  // 0 = pick by the cost model
  double theta_local = 0.05;
  double voxel_local = 4.0;
  double theta_global = 0.1;
  double voxel_global = 4.0;
  int min_points = 20;
  int max_depth = 3;
};

// Shared parameter guard, also run by the pipeline before its pass loop so
// config mistakes surface as thrown ConfigError rather than a failed pass.
void validate_pyramid_config(const PyramidConfig& config);

// Half-open cover of one level: window j spans [start, start+length).
struct WindowRef {
  int start = 0;
  int length = 0;
};

// Fixed-stride cover. Starts are s*j; every window has length w except the
// last, which absorbs the trailing frames (up to w+s-1). A level shorter than
// w is a single window.
std::vector<WindowRef> partition_windows(int n_frames, int w, int s);

// Planning model for the total solve effort of an l-layer pyramid. Treats
// level i as holding N/s^i frames; the windowed levels cost w^3/n per frame
// and the top level is one cubic global solve.
double predict_cost(double n_frames, int w, int s, int workers, int l);

// Stationary-point layer count of the cost model, floored to an integer.
// Reported alongside select_layers; the argmin is what construction uses.
int closed_form_l(double n_frames, int w, int s, int workers);

// Integer argmin of predict_cost over l in [1, 1 + floor(log_s(N/w))]; the
// cap keeps at least w frames entering the top level. Ties pick the smaller l.
int select_layers(double n_frames, int w, int s, int workers);

// Plane-feature points of a solved window, expressed in the window's first
// frame through the optimized relative poses. The pose field is left at
// identity; the caller assigns the chained keyframe pose.
Frame aggregate_keyframe(const std::vector<PlaneVoxel>& voxels, const WindowResult& result);

// One level of the hierarchy as consumed by graph construction: the frame
// count, the global poses the level was built at, its window cover, and every
// window's solve result (kept for factor extraction).
struct PyramidLayer {
  int n_frames = 0;
  Trajectory poses;
  std::vector<WindowRef> windows;
  std::vector<WindowResult> results;
};

struct Pyramid {
  // layers[0] is the input level; layers.back() is the top level, always
  // covered by exactly one window solved with the global theta/voxel pair.
  std::vector<PyramidLayer> layers;
  double top_cost = 0.0;
  double t_voxel_s = 0.0;
  double t_ba_s = 0.0;
};

// Bottom-up construction: partition each level, solve windows on a worker
// pool, aggregate keyframes, stack until the selected layer count, then one
// global solve over the top level. A window whose voxel map retains nothing
// keeps its input poses, contributes an empty keyframe, and is flagged
// (no_features) so factor construction can fall back to identity information;
// a warning goes to stderr. Output is bitwise-deterministic in the worker
// count.
Pyramid build_pyramid(std::span<const Frame> frames, const Trajectory& init,
                      const PyramidConfig& config, const BaParams& ba);

}  // namespace hba
