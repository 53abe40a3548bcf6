#include "hba/synth.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hba/errors.hpp"
#include "hba/frame_io.hpp"

namespace hba {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSensorHeight = 1.5;
constexpr double kMinRange = 0.05;  // rejects hits on planes the sensor sits on

Mat3 yaw(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Pose ground_truth_pose(const SceneSpec& spec, int k) {
  const int n = spec.frames;
  switch (spec.shape) {
    case TrajectoryShape::Loop: {
      const double radius = n * spec.step / (2.0 * kPi);
      const double th = 2.0 * kPi * k / n;
      return Pose(yaw(th + kPi / 2.0),
                  Vec3(radius * std::cos(th), radius * std::sin(th), kSensorHeight));
    }
    case TrajectoryShape::Line:
      return Pose(Mat3::Identity(), Vec3(k * spec.step, 0.0, kSensorHeight));
    case TrajectoryShape::FigureEight: {
      // Gerono lemniscate; 6.097 approximates its perimeter per unit scale.
      const double a = n * spec.step / 6.097;
      const double t = 2.0 * kPi * k / n;
      const double x = a * std::sin(t);
      const double y = a * std::sin(t) * std::cos(t);
      const double heading = std::atan2(a * std::cos(2.0 * t), a * std::cos(t));
      return Pose(yaw(heading), Vec3(x, y, kSensorHeight));
    }
  }
  throw ConfigError("scene: bad trajectory shape");
}

void validate(const SceneSpec& spec) {
  auto fail = [](const std::string& msg) {
    throw ConfigError("scene: " + msg);
  };
  if (spec.planes.empty()) fail("no planes");
  for (const PlaneSpec& p : spec.planes) {
    if (p.normal.norm() < 1e-12) fail("zero plane normal");
    if (!(p.extent_u > 0.0) || !(p.extent_v > 0.0)) fail("plane extents must be > 0");
  }
  if (spec.frames < 1) fail("frames must be >= 1");
  if (!(spec.step > 0.0)) fail("step must be > 0");
  if (spec.rays_azimuth < 1 || spec.rays_elevation < 1) fail("rays must be >= 1");
  if (!(spec.max_range > 0.0)) fail("max_range must be > 0");
  if (spec.point_sigma < 0.0 || spec.perturb_rot_deg < 0.0 || spec.perturb_trans < 0.0 ||
      spec.drift_rate < 0.0)
    fail("noise parameters must be >= 0");
}

}  // namespace

void plane_axes(const Vec3& normal, Vec3& u, Vec3& v) {
  const Vec3 n = normal.normalized();
  const Vec3 ref = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  u = n.cross(ref).normalized();
  v = n.cross(u);
}

std::vector<PlaneSpec> box_room(const Vec3& lo, const Vec3& hi) {
  const Vec3 c = 0.5 * (lo + hi);
  const Vec3 h = 0.5 * (hi - lo);
  std::vector<PlaneSpec> planes;
  auto face = [&](const Vec3& point, const Vec3& normal) {
    PlaneSpec p;
    p.point = point;
    p.normal = normal;
    Vec3 u, v;
    plane_axes(normal, u, v);
    // Axis-aligned normals make u, v signed unit axes, so the half-width along
    // each is just the matching component of h.
    p.extent_u = std::abs(u.cwiseAbs().dot(h));
    p.extent_v = std::abs(v.cwiseAbs().dot(h));
    planes.push_back(p);
  };
  face(Vec3(c.x(), c.y(), lo.z()), Vec3::UnitZ());
  face(Vec3(c.x(), c.y(), hi.z()), -Vec3::UnitZ());
  face(Vec3(lo.x(), c.y(), c.z()), Vec3::UnitX());
  face(Vec3(hi.x(), c.y(), c.z()), -Vec3::UnitX());
  face(Vec3(c.x(), lo.y(), c.z()), Vec3::UnitY());
  face(Vec3(c.x(), hi.y(), c.z()), -Vec3::UnitY());
  return planes;
}

SynthResult generate(const SceneSpec& spec) {
  validate(spec);

  struct PlaneFrame {
    Vec3 p0, n, u, v;
    double eu, ev;
  };
  std::vector<PlaneFrame> planes;
  planes.reserve(spec.planes.size());
  for (const PlaneSpec& p : spec.planes) {
    PlaneFrame f;
    f.p0 = p.point;
    f.n = p.normal.normalized();
    plane_axes(p.normal, f.u, f.v);
    f.eu = p.extent_u;
    f.ev = p.extent_v;
    planes.push_back(f);
  }

  const double elev_lo = -30.0 * kPi / 180.0;
  const double elev_hi = 30.0 * kPi / 180.0;
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(spec.rays_azimuth) * spec.rays_elevation);
  for (int j = 0; j < spec.rays_elevation; ++j) {
    const double e = spec.rays_elevation == 1
                         ? 0.0
                         : elev_lo + (elev_hi - elev_lo) * j / (spec.rays_elevation - 1);
    for (int i = 0; i < spec.rays_azimuth; ++i) {
      const double a = 2.0 * kPi * i / spec.rays_azimuth;
      dirs.emplace_back(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthResult out;
  out.frames.resize(static_cast<std::size_t>(spec.frames));
  out.ground_truth.reserve(static_cast<std::size_t>(spec.frames));
  for (int k = 0; k < spec.frames; ++k)
    out.ground_truth.push_back(ground_truth_pose(spec, k));

  for (int k = 0; k < spec.frames; ++k) {
    const Pose& T = out.ground_truth[static_cast<std::size_t>(k)];
    std::vector<Vec3>& pts = out.frames[static_cast<std::size_t>(k)].points;
    for (const Vec3& dir_local : dirs) {
      const Vec3 d = T.R * dir_local;
      double best = spec.max_range + 1.0;
      for (const PlaneFrame& pl : planes) {
        const double denom = pl.n.dot(d);
        if (std::abs(denom) < 1e-12) continue;
        const double s = pl.n.dot(pl.p0 - T.t) / denom;
        if (s < kMinRange || s > spec.max_range || s >= best) continue;
        const Vec3 q = T.t + s * d;
        if (std::abs(pl.u.dot(q - pl.p0)) > pl.eu) continue;
        if (std::abs(pl.v.dot(q - pl.p0)) > pl.ev) continue;
        best = s;
      }
      if (best <= spec.max_range) {
        Vec3 local = best * dir_local;  // T^-1(t + s R dir) = s dir, exactly
        if (spec.point_sigma > 0.0) {
          local.x() += spec.point_sigma * gauss(rng);
          local.y() += spec.point_sigma * gauss(rng);
          local.z() += spec.point_sigma * gauss(rng);
        }
        pts.push_back(local);
      }
    }
    if (pts.empty())
      throw EmptyScan(
                       "scene: pose " + std::to_string(k) + " sees no plane");
  }

  // Initial guess: odometry-style corruption. Each ground-truth increment is
  // perturbed by a drift twist in its local frame before re-integration, so
  // small per-step errors compound into an unbounded end gap; white pose noise
  // is applied per frame on top. Zero sigmas reproduce gt bitwise.
  out.perturbed.reserve(static_cast<std::size_t>(spec.frames));
  const double rot_sigma = spec.perturb_rot_deg * kPi / 180.0;
  const bool any_noise =
      spec.drift_rate > 0.0 || rot_sigma > 0.0 || spec.perturb_trans > 0.0;
  // The drift twist is anisotropic: a radian of rotation walk destroys far
  // more of the initial guess than a meter of translation walk at room scale,
  // so rotation components run at a quarter of the rate.
  constexpr double kDriftRotScale = 0.25;
  Pose chain = out.ground_truth[0];
  for (int k = 0; k < spec.frames; ++k) {
    Vec6 eps, white;
    for (int i = 0; i < 3; ++i) {
      eps(i) = kDriftRotScale * spec.drift_rate * gauss(rng);
      white(i) = rot_sigma * gauss(rng);
    }
    for (int i = 3; i < 6; ++i) {
      eps(i) = spec.drift_rate * gauss(rng);
      white(i) = spec.perturb_trans * gauss(rng);
    }
    if (!any_noise) {
      out.perturbed.push_back(out.ground_truth[static_cast<std::size_t>(k)]);
    } else {
      if (k > 0) {
        const Pose inc = relative(out.ground_truth[static_cast<std::size_t>(k - 1)],
                                  out.ground_truth[static_cast<std::size_t>(k)]);
        chain = compose(chain, compose(inc, exp_map(Twist::from_vec(eps))));
      }
      out.perturbed.push_back(compose(chain, exp_map(Twist::from_vec(white))));
    }
    out.frames[static_cast<std::size_t>(k)].pose = out.perturbed.back();
  }
  return out;
}

SceneSpec parse_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scene spec: cannot open " + path);
  SceneSpec spec;
  spec.planes.clear();
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError("scene spec: " + msg + " (" + path + ":" + std::to_string(lineno) + ")");
  };
  auto numbers = [&](const std::string& value, std::size_t want) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
        if (used != tok.size()) fail("bad number '" + tok + "'");
      } catch (const InputError&) {
        throw;
      } catch (const std::exception&) {
        fail("bad number '" + tok + "'");
      }
    }
    if (out.size() != want) fail("expected " + std::to_string(want) + " comma-separated numbers");
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const std::size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto strip = [](std::string s) {
      const std::size_t b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) return std::string();
      const std::size_t e2 = s.find_last_not_of(" \t");
      return s.substr(b2, e2 - b2 + 1);
    };
    key = strip(key);
    value = strip(value);
    if (value.empty()) fail("empty value for '" + key + "'");
    try {
      if (key == "trajectory") {
        if (value == "loop")
          spec.shape = TrajectoryShape::Loop;
        else if (value == "line")
          spec.shape = TrajectoryShape::Line;
        else if (value == "figure-eight")
          spec.shape = TrajectoryShape::FigureEight;
        else
          fail("trajectory must be loop|line|figure-eight");
      } else if (key == "frames") {
        spec.frames = std::stoi(value);
      } else if (key == "step") {
        spec.step = std::stod(value);
      } else if (key == "rays_azimuth") {
        spec.rays_azimuth = std::stoi(value);
      } else if (key == "rays_elevation") {
        spec.rays_elevation = std::stoi(value);
      } else if (key == "max_range") {
        spec.max_range = std::stod(value);
      } else if (key == "point_sigma") {
        spec.point_sigma = std::stod(value);
      } else if (key == "perturb_rot_deg") {
        spec.perturb_rot_deg = std::stod(value);
      } else if (key == "perturb_trans") {
        spec.perturb_trans = std::stod(value);
      } else if (key == "drift_rate") {
        spec.drift_rate = std::stod(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else if (key == "room") {
        const auto v = numbers(value, 6);
        const auto faces = box_room(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
        spec.planes.insert(spec.planes.end(), faces.begin(), faces.end());
      } else if (key == "plane") {
        const auto v = numbers(value, 8);
        PlaneSpec p;
        p.point = Vec3(v[0], v[1], v[2]);
        p.normal = Vec3(v[3], v[4], v[5]);
        p.extent_u = v[6];
        p.extent_v = v[7];
        spec.planes.push_back(p);
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      fail("bad value for '" + key + "'");
    }
  }
  return spec;
}

void write_dataset(const std::string& dir, const SynthResult& result) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t k = 0; k < result.frames.size(); ++k) {
    std::snprintf(name, sizeof(name), "%06zu.bin", k);
    const std::vector<Vec3>& pts = result.frames[k].points;
    write_scan_bin(dir + "/" + name, pts, std::vector<float>(pts.size(), 0.0f));
  }
  write_trajectory(dir + "/poses_gt.txt", result.ground_truth, PoseFormat::Kitti);
  write_trajectory(dir + "/poses_init.txt", result.perturbed, PoseFormat::Kitti);
}

}  // namespace hba
