#pragma once

#include <vector>

#include "hba/geometry.hpp"

namespace hba {

// One scan with its current global pose estimate. Points are always stored in
// the sensor (local) frame; poses map local into global.
struct Frame {
  std::vector<Vec3> points;
  Pose pose;
};

using Trajectory = std::vector<Pose>;

}  // namespace hba
