#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

namespace hba {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Twist ordering is (rotation, translation) everywhere: vec() stacks rot
// on top of trans and every 6-dof gradient/Hessian block follows the same
// layout. Do not reorder.
struct Twist {
  Vec3 rot = Vec3::Zero();
  Vec3 trans = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& r, const Vec3& t) : rot(r), trans(t) {}

  Vec6 vec() const {
    Vec6 v;
    v << rot, trans;
    return v;
  }
  static Twist from_vec(const Vec6& v) { return Twist(v.head<3>(), v.tail<3>()); }
  double norm() const { return vec().norm(); }
};

Mat3 skew(const Vec3& v);

// Rigid transform. R is kept orthonormal by construction; long composition
// chains re-project via polar decomposition every 1000 products so drift
// stays below 1e-9 even after 1e6 composes.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  std::int32_t orth_age = 0;

  Pose() = default;
  Pose(const Mat3& R_, const Vec3& t_) : R(R_), t(t_) {}

  Vec3 act(const Vec3& p) const { return R * p + t; }
  Pose inverse() const { return Pose(R.transpose(), -(R.transpose() * t)); }
};

// compose(a, b): apply b first, then a (matrix product a*b).
Pose compose(const Pose& a, const Pose& b);
// relative(a, b) = a^-1 * b.
Pose relative(const Pose& a, const Pose& b);

Pose exp_map(const Twist& xi);
// Throws AngleAtPi when the rotation angle is >= pi - 1e-6.
Twist log_map(const Pose& T);

// Adjoint of T for (rot, trans) twists: Exp(adjoint(T) xi) = T Exp(xi) T^-1.
Mat6 adjoint(const Pose& T);

// ad operator (twist bracket) in the same ordering.
Mat6 ad(const Twist& xi);

// Inverse right Jacobian of the exponential at xi:
//   Log(Exp(xi) Exp(d)) ~= xi + inv_right_jacobian(xi) d  for small d.
// Second-order series below 1e-4 rotation angle, closed form otherwise.
Mat6 inv_right_jacobian(const Twist& xi);

// Re-project R onto SO(3) via polar decomposition.
Mat3 orthonormalize(const Mat3& R);

struct Eig3 {
  // Ascending eigenvalues and matching unit eigenvectors as columns.
  Vec3 values;
  Mat3 vectors;
};

// Symmetric 3x3 eigendecomposition. The input is symmetrized first, so a
// slightly asymmetric accumulation result is fine.
Eig3 sym_eig3(const Mat3& M);

}  // namespace hba
