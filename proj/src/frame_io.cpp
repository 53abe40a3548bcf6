#include "hba/frame_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hba/errors.hpp"

namespace hba {

namespace {

void require_finite(const Vec3& p, const std::string& path) {
  if (!p.allFinite()) throw FormatError(path + ": non-finite point coordinate");
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw InputError(path + ": not found");
  return in;
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw InputError(path + ": cannot open for writing");
  return out;
}

std::vector<Vec3> load_bin_xyzi(const std::string& path) {
  std::ifstream in = open_input(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  if (size % 16 != 0) throw FormatError(path + ": byte count not a multiple of 16");
  const std::size_t n = static_cast<std::size_t>(size / 16);
  if (n == 0) throw EmptyScan(path + ": no points");
  std::vector<float> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()), size);
  if (!in) throw FormatError(path + ": short read");
  std::vector<Vec3> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = Vec3(raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]);
    require_finite(pts[i], path);
  }
  return pts;
}

// Shared tail for the two ascii cloud formats: rows of whitespace-separated
// numbers with x, y, z at known column positions.
std::vector<Vec3> read_ascii_rows(std::istream& in, std::size_t n_rows, std::size_t n_cols,
                                  int ix, int iy, int iz, const std::string& path) {
  std::vector<Vec3> pts;
  pts.reserve(n_rows);
  std::vector<double> row(n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (!(in >> row[c])) throw FormatError(path + ": truncated point data");
    }
    const Vec3 p(row[ix], row[iy], row[iz]);
    require_finite(p, path);
    pts.push_back(p);
  }
  return pts;
}

std::vector<Vec3> load_ply_ascii(const std::string& path) {
  std::ifstream in = open_input(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw FormatError(path + ": missing ply magic");
  std::size_t n_vertex = 0;
  int ix = -1, iy = -1, iz = -1, n_props = 0;
  bool in_vertex = false, ascii = false, header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string f;
      ls >> f;
      ascii = (f == "ascii");
    } else if (tok == "element") {
      std::string name;
      std::size_t cnt = 0;
      ls >> name >> cnt;
      in_vertex = (name == "vertex");
      if (in_vertex) n_vertex = cnt;
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (name == "x") ix = n_props;
      if (name == "y") iy = n_props;
      if (name == "z") iz = n_props;
      ++n_props;
    } else if (tok == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FormatError(path + ": unterminated ply header");
  if (!ascii) throw FormatError(path + ": expected ascii ply");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path + ": vertex missing x/y/z");
  if (n_vertex == 0) throw EmptyScan(path + ": no points");
  return read_ascii_rows(in, n_vertex, static_cast<std::size_t>(n_props), ix, iy, iz, path);
}

std::vector<Vec3> load_pcd_ascii(const std::string& path) {
  std::ifstream in = open_input(path, std::ios::in);
  std::string line;
  std::size_t n_points = 0;
  int ix = -1, iy = -1, iz = -1, n_fields = 0;
  bool data_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "FIELDS") {
      std::string f;
      while (ls >> f) {
        if (f == "x") ix = n_fields;
        if (f == "y") iy = n_fields;
        if (f == "z") iz = n_fields;
        ++n_fields;
      }
    } else if (tok == "POINTS") {
      ls >> n_points;
    } else if (tok == "DATA") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") throw FormatError(path + ": only ascii pcd data supported");
      data_seen = true;
      break;
    }
  }
  if (!data_seen) throw FormatError(path + ": missing DATA header");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path + ": FIELDS missing x/y/z");
  if (n_points == 0) throw EmptyScan(path + ": no points");
  return read_ascii_rows(in, n_points, static_cast<std::size_t>(n_fields), ix, iy, iz, path);
}

}  // namespace

ScanFormat scan_format_from_string(const std::string& s) {
  if (s == "bin-xyzi") return ScanFormat::BinXyzi;
  if (s == "ply-ascii") return ScanFormat::PlyAscii;
  if (s == "pcd-ascii") return ScanFormat::PcdAscii;
  throw ConfigError("unknown scan format: " + s);
}

PoseFormat pose_format_from_string(const std::string& s) {
  if (s == "kitti") return PoseFormat::Kitti;
  if (s == "tum") return PoseFormat::Tum;
  throw ConfigError("unknown pose format: " + s);
}

std::vector<Vec3> load_scan(const std::string& path, ScanFormat format) {
  switch (format) {
    case ScanFormat::BinXyzi:
      return load_bin_xyzi(path);
    case ScanFormat::PlyAscii:
      return load_ply_ascii(path);
    case ScanFormat::PcdAscii:
      return load_pcd_ascii(path);
  }
  throw ConfigError("unhandled scan format");
}

void write_scan_bin(const std::string& path, const std::vector<Vec3>& points,
                    const std::vector<float>& intensity) {
  std::ofstream out = open_output(path, std::ios::binary);
  for (std::size_t i = 0; i < points.size(); ++i) {
    float rec[4] = {static_cast<float>(points[i].x()), static_cast<float>(points[i].y()),
                    static_cast<float>(points[i].z()),
                    i < intensity.size() ? intensity[i] : 0.0f};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
}

Trajectory load_trajectory(const std::string& path, PoseFormat format) {
  std::ifstream in = open_input(path, std::ios::in);
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (format == PoseFormat::Kitti) {
      double v[12];
      for (double& x : v)
        if (!(ls >> x)) throw FormatError(where + ": expected 12 numbers");
      Mat3 R;
      R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
      const Vec3 t(v[3], v[7], v[11]);
      if (!R.allFinite() || !t.allFinite()) throw FormatError(where + ": non-finite pose");
      if (std::abs(R.determinant() - 1.0) > 1e-3)
        throw NonRigidRotation(where + ": rotation determinant off by more than 1e-3");
      traj.emplace_back(orthonormalize(R), t);
    } else {
      double ts, tx, ty, tz, qx, qy, qz, qw;
      if (!(ls >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
        throw FormatError(where + ": expected 8 numbers");
      Eigen::Quaterniond q(qw, qx, qy, qz);
      if (!std::isfinite(q.norm()) || q.norm() < 1e-12)
        throw FormatError(where + ": degenerate quaternion");
      q.normalize();
      const Vec3 t(tx, ty, tz);
      if (!t.allFinite()) throw FormatError(where + ": non-finite pose");
      traj.emplace_back(q.toRotationMatrix(), t);
    }
  }
  return traj;
}

void write_trajectory(const std::string& path, const Trajectory& traj, PoseFormat format) {
  std::ofstream out = open_output(path, std::ios::out);
  out.precision(12);
  out << std::scientific;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Pose& T = traj[i];
    if (format == PoseFormat::Kitti) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out << T.R(r, c) << ' ';
        out << T.t(r) << (r == 2 ? '\n' : ' ');
      }
    } else {
      Eigen::Quaterniond q(T.R);
      out << static_cast<double>(i) << ' ' << T.t.x() << ' ' << T.t.y() << ' ' << T.t.z() << ' '
          << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
    }
  }
}

std::vector<Vec3> filter_points(const std::vector<Vec3>& points, double size, bool enabled) {
  if (!enabled) return points;
  if (!(size > 0.0)) throw ConfigError("filter size must be positive");
  std::map<std::array<std::int64_t, 3>, std::pair<Vec3, std::int64_t>> cells;
  for (const Vec3& p : points) {
    std::array<std::int64_t, 3> key;
    for (int a = 0; a < 3; ++a) key[a] = static_cast<std::int64_t>(std::floor(p(a) / size));
    auto& cell = cells[key];
    if (cell.second == 0) cell.first = Vec3::Zero();
    cell.first += p;
    ++cell.second;
  }
  std::vector<Vec3> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells)
    out.push_back(cell.first / static_cast<double>(cell.second));
  return out;
}

void write_map_ply(const std::string& path, const std::vector<Vec3>& points) {
  std::ofstream out = open_output(path, std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Vec3& p : points) {
    const float rec[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                          static_cast<float>(p.z())};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
}

std::vector<Vec3> load_map_ply(const std::string& path) {
  std::ifstream in = open_input(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw FormatError(path + ": missing ply magic");
  std::size_t n_vertex = 0;
  int ix = -1, iy = -1, iz = -1, n_props = 0;
  bool binary = false, in_vertex = false, header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string f;
      ls >> f;
      if (f == "binary_little_endian")
        binary = true;
      else if (f != "ascii")
        throw FormatError(path + ": unsupported ply format " + f);
    } else if (tok == "element") {
      std::string name;
      std::size_t cnt = 0;
      ls >> name >> cnt;
      in_vertex = (name == "vertex");
      if (in_vertex) n_vertex = cnt;
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type != "float") throw FormatError(path + ": only float vertex properties supported");
      if (name == "x") ix = n_props;
      if (name == "y") iy = n_props;
      if (name == "z") iz = n_props;
      ++n_props;
    } else if (tok == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FormatError(path + ": unterminated ply header");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path + ": vertex missing x/y/z");
  std::vector<Vec3> pts;
  pts.reserve(n_vertex);
  if (binary) {
    std::vector<float> row(static_cast<std::size_t>(n_props));
    for (std::size_t i = 0; i < n_vertex; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(sizeof(float) * row.size()));
      if (!in) throw FormatError(path + ": truncated vertex data");
      const Vec3 p(row[ix], row[iy], row[iz]);
      require_finite(p, path);
      pts.push_back(p);
    }
  } else {
    pts = read_ascii_rows(in, n_vertex, static_cast<std::size_t>(n_props), ix, iy, iz, path);
  }
  return pts;
}

std::vector<std::string> list_scan_files(const std::string& dir, ScanFormat format) {
  const char* ext = format == ScanFormat::BinXyzi  ? ".bin"
                    : format == ScanFormat::PlyAscii ? ".ply"
                                                     : ".pcd";
  if (!std::filesystem::is_directory(dir)) throw InputError(dir + ": not a directory");
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace hba
