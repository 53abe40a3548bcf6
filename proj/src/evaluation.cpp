#include "hba/evaluation.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "hba/errors.hpp"
#include "hba/worker_pool.hpp"

namespace hba {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Least-squares rigid alignment of source translations onto target ones.
Pose align_translations(const Trajectory& source, const Trajectory& target) {
  const double n = static_cast<double>(source.size());
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cs += source[i].t;
    ct += target[i].t;
  }
  cs /= n;
  ct /= n;

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i)
    h += (source[i].t - cs) * (target[i].t - ct).transpose();

  Pose align;
  if (h.cwiseAbs().maxCoeff() > 1e-30) {
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    align.R = svd.matrixV() * d * svd.matrixU().transpose();
  }
  align.t = ct - align.R * cs;
  return align;
}

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(k.x), static_cast<std::uint64_t>(k.y),
                            static_cast<std::uint64_t>(k.z)}) {
      h ^= v;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

AteResult ate(const Trajectory& estimate, const Trajectory& ground_truth) {
  if (estimate.size() != ground_truth.size())
    throw LengthMismatch("ate: trajectory lengths differ (" + std::to_string(estimate.size()) +
                         " vs " + std::to_string(ground_truth.size()) + ")");
  if (estimate.empty()) throw LengthMismatch("ate: empty trajectories");

  AteResult res;
  res.alignment = align_translations(estimate, ground_truth);

  double rot_sq = 0.0, trans_sq = 0.0;
  res.rot_errors_deg.reserve(estimate.size());
  res.trans_errors_m.reserve(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Pose aligned = compose(res.alignment, estimate[i]);
    // Quaternion-free geodesic that stays finite at a half-turn.
    const double angle =
        Eigen::AngleAxisd(Mat3(ground_truth[i].R.transpose() * aligned.R)).angle();
    const double rot_deg = angle * 180.0 / kPi;
    const double trans = (aligned.t - ground_truth[i].t).norm();
    res.rot_errors_deg.push_back(rot_deg);
    res.trans_errors_m.push_back(trans);
    rot_sq += rot_deg * rot_deg;
    trans_sq += trans * trans;
  }
  const double n = static_cast<double>(estimate.size());
  res.rot_rmse_deg = std::sqrt(rot_sq / n);
  res.trans_rmse_m = std::sqrt(trans_sq / n);
  return res;
}

double mme(const std::vector<Vec3>& points, double radius, int workers) {
  if (!(radius > 0)) throw ConfigError("mme: radius must be positive");
  if (workers < 1) throw ConfigError("mme: workers must be >= 1");
  if (points.empty()) throw DegenerateMap("mme: empty map");

  std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
  auto cell_of = [&](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / radius)),
                   static_cast<std::int64_t>(std::floor(p.y() / radius)),
                   static_cast<std::int64_t>(std::floor(p.z() / radius))};
  };
  for (std::size_t i = 0; i < points.size(); ++i)
    grid[cell_of(points[i])].push_back(static_cast<int>(i));

  const double r2 = radius * radius;
  std::vector<double> entropy(points.size(), 0.0);
  std::vector<char> keep(points.size(), 0);

  parallel_for(workers, points.size(), [&](std::size_t i) {
    const Vec3& p = points[i];
    const CellKey c = cell_of(p);
    Vec3 sum = Vec3::Zero();
    Mat3 outer = Mat3::Zero();
    int count = 0;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (int j : it->second) {
            const Vec3& q = points[static_cast<std::size_t>(j)];
            if ((q - p).squaredNorm() > r2) continue;
            sum += q;
            outer.noalias() += q * q.transpose();
            ++count;
          }
        }
    if (count < 10) return;
    const Vec3 mean = sum / static_cast<double>(count);
    Mat3 cov = outer / static_cast<double>(count) - mean * mean.transpose();
    cov.diagonal().array() += 1e-12;
    // det(2 pi e Sigma) = (2 pi e)^3 det(Sigma)
    entropy[i] = 0.5 * (3.0 * std::log(2.0 * kPi * std::exp(1.0)) + std::log(cov.determinant()));
    keep[i] = 1;
  });

  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (keep[i]) {
      total += entropy[i];
      ++used;
    }
  if (used == 0)
    throw DegenerateMap("mme: no point has 10 neighbors within radius " + std::to_string(radius));
  return total / static_cast<double>(used);
}

}  // namespace hba
