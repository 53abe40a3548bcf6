#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "hba/errors.hpp"
#include "hba/frame_io.hpp"

using namespace hba;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hba_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis(u(rng), u(rng), u(rng));
  axis.normalize();
  std::uniform_real_distribution<double> ua(0.0, 2.5);
  const Twist xi(axis * ua(rng), Vec3(10.0 * u(rng), 10.0 * u(rng), 10.0 * u(rng)));
  return exp_map(xi);
}

}  // namespace

TEST_CASE("binary scan decodes two known points and drops intensity") {
  TempDir tmp;
  const float rec[8] = {1.0f, 2.0f, 3.0f, 0.5f, -4.0f, 5.5f, -6.25f, 0.9f};
  write_bytes(tmp.file("a.bin"), rec, sizeof(rec));
  const auto pts = load_scan(tmp.file("a.bin"), ScanFormat::BinXyzi);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Vec3(1.0, 2.0, 3.0));
  CHECK(pts[1] == Vec3(-4.0, 5.5, -6.25));
}

TEST_CASE("binary scan rejects empty and ragged files") {
  TempDir tmp;
  write_bytes(tmp.file("empty.bin"), "", 0);
  CHECK_THROWS_AS(load_scan(tmp.file("empty.bin"), ScanFormat::BinXyzi), EmptyScan);
  const char junk[15] = {0};
  write_bytes(tmp.file("ragged.bin"), junk, sizeof(junk));
  CHECK_THROWS_AS(load_scan(tmp.file("ragged.bin"), ScanFormat::BinXyzi), FormatError);
}

TEST_CASE("binary scan rejects non-finite coordinates") {
  TempDir tmp;
  float rec[4] = {1.0f, 2.0f, 3.0f, 0.0f};
  rec[1] = std::numeric_limits<float>::quiet_NaN();
  write_bytes(tmp.file("nan.bin"), rec, sizeof(rec));
  CHECK_THROWS_AS(load_scan(tmp.file("nan.bin"), ScanFormat::BinXyzi), FormatError);
}

TEST_CASE("ascii ply scan parses extra properties around x/y/z") {
  TempDir tmp;
  std::ofstream out(tmp.file("a.ply"));
  out << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float intensity\n"
         "property float x\nproperty float y\nproperty float z\nend_header\n"
         "9 1 2 3\n8 4 5 6\n";
  out.close();
  const auto pts = load_scan(tmp.file("a.ply"), ScanFormat::PlyAscii);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Vec3(1.0, 2.0, 3.0));
  CHECK(pts[1] == Vec3(4.0, 5.0, 6.0));
}

TEST_CASE("ascii pcd scan parses and honors field order") {
  TempDir tmp;
  std::ofstream out(tmp.file("a.pcd"));
  out << "# comment\nVERSION .7\nFIELDS intensity x y z\nSIZE 4 4 4 4\nTYPE F F F F\n"
         "COUNT 1 1 1 1\nWIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n"
         "7 1 2 3\n6 -1 -2 -3\n";
  out.close();
  const auto pts = load_scan(tmp.file("a.pcd"), ScanFormat::PcdAscii);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Vec3(1.0, 2.0, 3.0));
  CHECK(pts[1] == Vec3(-1.0, -2.0, -3.0));
}

TEST_CASE("kitti identity line parses to identity pose") {
  TempDir tmp;
  std::ofstream out(tmp.file("p.txt"));
  out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  out.close();
  const Trajectory traj = load_trajectory(tmp.file("p.txt"), PoseFormat::Kitti);
  REQUIRE(traj.size() == 1);
  CHECK((traj[0].R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(traj[0].t.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kitti rejects non-rigid rotation blocks") {
  TempDir tmp;
  std::ofstream out(tmp.file("p.txt"));
  out << "2 0 0 0 0 1 0 0 0 0 1 0\n";
  out.close();
  CHECK_THROWS_AS(load_trajectory(tmp.file("p.txt"), PoseFormat::Kitti), NonRigidRotation);
}

TEST_CASE("tum loader normalizes quaternions") {
  TempDir tmp;
  std::ofstream out(tmp.file("p.txt"));
  // 2x the unit quaternion for a 90 degree yaw.
  const double s = 2.0 * std::sqrt(0.5);
  out << "0 1 2 3 0 0 " << s << ' ' << s << "\n";
  out.close();
  const Trajectory traj = load_trajectory(tmp.file("p.txt"), PoseFormat::Tum);
  REQUIRE(traj.size() == 1);
  CHECK((traj[0].R.transpose() * traj[0].R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(traj[0].R(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(traj[0].t == Vec3(1.0, 2.0, 3.0));
}

TEST_CASE("trajectory round trips under both formats to 1e-6") {
  TempDir tmp;
  std::mt19937_64 rng(3);
  Trajectory traj;
  for (int i = 0; i < 100; ++i) traj.push_back(random_pose(rng));
  for (PoseFormat f : {PoseFormat::Kitti, PoseFormat::Tum}) {
    const std::string path = tmp.file("round.txt");
    write_trajectory(path, traj, f);
    const Trajectory back = load_trajectory(path, f);
    REQUIRE(back.size() == traj.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      worst = std::max(worst, (back[i].R - traj[i].R).cwiseAbs().maxCoeff());
      worst = std::max(worst, (back[i].t - traj[i].t).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("filter keeps a 1 m grid intact at half-meter cells") {
  std::vector<Vec3> pts;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y)
      for (int z = 0; z < 10; ++z) pts.emplace_back(x, y, z);
  const auto out = filter_points(pts, 0.5, true);
  CHECK(out.size() == 1000);
}

TEST_CASE("filter averages points sharing a cell and is identity when disabled") {
  const std::vector<Vec3> pts = {Vec3(0.1, 0.1, 0.1), Vec3(0.3, 0.1, 0.1)};
  const auto out = filter_points(pts, 0.5, true);
  REQUIRE(out.size() == 1);
  CHECK((out[0] - Vec3(0.2, 0.1, 0.1)).cwiseAbs().maxCoeff() < 1e-15);
  const auto same = filter_points(pts, 0.5, false);
  CHECK(same.size() == 2);
}

TEST_CASE("filter uses floor cells for negative coordinates") {
  const std::vector<Vec3> pts = {Vec3(-0.1, 0.0, 0.0), Vec3(0.1, 0.0, 0.0)};
  const auto out = filter_points(pts, 0.5, true);
  CHECK(out.size() == 2);
}

TEST_CASE("map ply round trips binary and ascii") {
  TempDir tmp;
  std::vector<Vec3> pts = {Vec3(0.5, -1.25, 3.0), Vec3(7.0, 8.5, -9.0)};
  write_map_ply(tmp.file("m.ply"), pts);
  const auto back = load_map_ply(tmp.file("m.ply"));
  REQUIRE(back.size() == 2);
  for (int i = 0; i < 2; ++i) CHECK((back[i] - pts[i]).cwiseAbs().maxCoeff() < 1e-6);

  std::ofstream out(tmp.file("a.ply"));
  out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
         "property float z\nend_header\n1 2 3\n";
  out.close();
  const auto a = load_map_ply(tmp.file("a.ply"));
  REQUIRE(a.size() == 1);
  CHECK(a[0] == Vec3(1.0, 2.0, 3.0));
}

TEST_CASE("scan directory listing is sorted and extension-filtered") {
  TempDir tmp;
  const float rec[4] = {1.0f, 1.0f, 1.0f, 0.0f};
  write_bytes(tmp.file("000002.bin"), rec, sizeof(rec));
  write_bytes(tmp.file("000000.bin"), rec, sizeof(rec));
  write_bytes(tmp.file("000001.bin"), rec, sizeof(rec));
  write_bytes(tmp.file("notes.txt"), rec, sizeof(rec));
  const auto files = list_scan_files(tmp.path.string(), ScanFormat::BinXyzi);
  REQUIRE(files.size() == 3);
  CHECK(files[0].ends_with("000000.bin"));
  CHECK(files[2].ends_with("000002.bin"));
}

TEST_CASE("missing files raise input errors") {
  CHECK_THROWS_AS(load_scan("/nonexistent/scan.bin", ScanFormat::BinXyzi), InputError);
  CHECK_THROWS_AS(load_trajectory("/nonexistent/poses.txt", PoseFormat::Kitti), InputError);
}
