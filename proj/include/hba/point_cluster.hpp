#pragma once

#include "hba/geometry.hpp"

namespace hba {

// Sufficient statistics of a point set: outer-product sum, vector sum, count.
// Merging is commutative/associative and transform() commutes with merge, so
// per-frame clusters can be kept in local coordinates and combined under any
// pose estimate without touching the raw points.
struct PointCluster {
  Mat3 outer_sum = Mat3::Zero();
  Vec3 sum = Vec3::Zero();
  std::int64_t count = 0;

  void push(const Vec3& p) {
    outer_sum.noalias() += p * p.transpose();
    sum += p;
    ++count;
  }

  void merge(const PointCluster& o) {
    outer_sum += o.outer_sum;
    sum += o.sum;
    count += o.count;
  }

  PointCluster transformed(const Pose& T) const {
    PointCluster out;
    const Vec3 rs = T.R * sum;
    out.outer_sum = T.R * outer_sum * T.R.transpose() + rs * T.t.transpose() +
                    T.t * rs.transpose() + static_cast<double>(count) * T.t * T.t.transpose();
    out.sum = rs + static_cast<double>(count) * T.t;
    out.count = count;
    return out;
  }

  Vec3 mean() const { return sum / static_cast<double>(count); }

  // Covariance of the points: E[pp^T] - mean mean^T.
  Mat3 scatter() const {
    const double n = static_cast<double>(count);
    const Vec3 m = sum / n;
    return outer_sum / n - m * m.transpose();
  }
};

}  // namespace hba
