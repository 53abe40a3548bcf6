#pragma once

#include <string>
#include <vector>

#include "hba/frame.hpp"

namespace hba {

enum class ScanFormat { BinXyzi, PlyAscii, PcdAscii };
enum class PoseFormat { Kitti, Tum };

ScanFormat scan_format_from_string(const std::string& s);
PoseFormat pose_format_from_string(const std::string& s);

// Scan loaders return local-frame points. All of them reject NaN/Inf
// coordinates (FormatError) and empty scans (EmptyScan).
std::vector<Vec3> load_scan(const std::string& path, ScanFormat format);

// Raw binary layout: float32 x,y,z,intensity per point, little endian.
void write_scan_bin(const std::string& path, const std::vector<Vec3>& points,
                    const std::vector<float>& intensity);

// kitti: 12 numbers per line, row-major 3x4 [R|t]. Rotations with
// |det(R) - 1| > 1e-3 raise NonRigidRotation; accepted ones are re-projected
// onto SO(3) so parsing precision never degrades downstream composition.
// tum: "t tx ty tz qx qy qz qw" per line, quaternion normalized on load.
Trajectory load_trajectory(const std::string& path, PoseFormat format);
void write_trajectory(const std::string& path, const Trajectory& traj, PoseFormat format);

// Voxel-grid centroid downsample. Cells are anchored at the origin with floor
// division, output is ordered by cell key, so the result is deterministic.
std::vector<Vec3> filter_points(const std::vector<Vec3>& points, double size, bool enabled);

// Map output: binary little-endian PLY with float x,y,z vertices.
void write_map_ply(const std::string& path, const std::vector<Vec3>& points);
// Reads both binary_little_endian and ascii PLY vertex clouds.
std::vector<Vec3> load_map_ply(const std::string& path);

// Lexicographically sorted scan files (by extension of the format) in a
// directory.
std::vector<std::string> list_scan_files(const std::string& dir, ScanFormat format);

}  // namespace hba
