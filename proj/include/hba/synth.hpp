#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hba/frame.hpp"

namespace hba {

// Finite rectangular plane patch. extent_u/extent_v are half-widths along the
// two in-plane axes derived deterministically from the normal.
struct PlaneSpec {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double extent_u = 1.0;
  double extent_v = 1.0;
};

enum class TrajectoryShape { Loop, Line, FigureEight };

struct SceneSpec {
  std::vector<PlaneSpec> planes;
  TrajectoryShape shape = TrajectoryShape::Loop;
  int frames = 125;
  double step = 0.1;  // path length per frame, meters

  // Sensor: azimuth ring x elevation fan, elevations span [-30, 30] degrees.
  int rays_azimuth = 64;
  int rays_elevation = 8;
  double max_range = 30.0;
  double point_sigma = 0.0;  // isotropic noise in the sensor frame, meters

  // Initial-guess corruption: white pose noise plus a multiplicative
  // random-walk drift (twist magnitude per frame).
  double perturb_rot_deg = 0.0;
  double perturb_trans = 0.0;
  double drift_rate = 0.0;

  std::uint64_t seed = 1;
};

struct SynthResult {
  std::vector<Frame> frames;  // local points; pose = perturbed initial guess
  Trajectory ground_truth;
  Trajectory perturbed;
};

// Six inward-facing planes of the axis-aligned box [lo, hi].
std::vector<PlaneSpec> box_room(const Vec3& lo, const Vec3& hi);

// In-plane unit axes (u, v) for a normal; u x v = n. Deterministic.
void plane_axes(const Vec3& normal, Vec3& u, Vec3& v);

SynthResult generate(const SceneSpec& spec);

// Scene description from a key=value file; '#' starts a comment. Keys:
// trajectory, frames, step, rays_azimuth, rays_elevation, max_range,
// point_sigma, perturb_rot_deg, perturb_trans, drift_rate, seed,
// room=x0,y0,z0,x1,y1,z1 (repeatable), plane=px,py,pz,nx,ny,nz,eu,ev
// (repeatable). Unknown keys are hard errors.
SceneSpec parse_scene_file(const std::string& path);

// Writes 000000.bin.. scans plus poses_gt.txt / poses_init.txt (kitti rows).
void write_dataset(const std::string& dir, const SynthResult& result);

}  // namespace hba
