#include "hba/geometry.hpp"

#include <cmath>

#include "hba/errors.hpp"

namespace hba {

namespace {

constexpr double kSmallAngle = 1e-6;       // Taylor switch for exp/log
constexpr double kSmallJacAngle = 1e-4;    // series switch for inv_right_jacobian
constexpr std::int32_t kOrthEvery = 1000;  // compositions between re-projections

Vec3 vee(const Mat3& M) { return Vec3(M(2, 1), M(0, 2), M(1, 0)); }

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 M;
  M << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return M;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out(a.R * b.R, a.R * b.t + a.t);
  out.orth_age = a.orth_age + b.orth_age + 1;
  if (out.orth_age >= kOrthEvery) {
    out.R = orthonormalize(out.R);
    out.orth_age = 0;
  }
  return out;
}

Pose relative(const Pose& a, const Pose& b) { return compose(a.inverse(), b); }

Pose exp_map(const Twist& xi) {
  const double ang = xi.rot.norm();
  const Mat3 W = skew(xi.rot);
  Mat3 R, V;
  if (ang < kSmallAngle) {
    R = Mat3::Identity() + W + 0.5 * W * W;
    V = Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  } else {
    const double s = std::sin(ang), c = std::cos(ang);
    const double a2 = ang * ang, a3 = a2 * ang;
    R = Mat3::Identity() + (s / ang) * W + ((1.0 - c) / a2) * W * W;
    V = Mat3::Identity() + ((1.0 - c) / a2) * W + ((ang - s) / a3) * W * W;
  }
  return Pose(R, V * xi.trans);
}

Twist log_map(const Pose& T) {
  const double tr = T.R.trace();
  const double c = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  const double ang = std::acos(c);
  if (ang >= M_PI - 1e-6) throw AngleAtPi("rotation angle too close to pi for a stable logarithm");

  const Mat3 A = 0.5 * (T.R - T.R.transpose());
  Vec3 rot;
  Mat3 Vinv;
  if (ang < kSmallAngle) {
    const Vec3 w = vee(A);
    rot = w * (1.0 + w.squaredNorm() / 6.0);
    const Mat3 W = skew(rot);
    Vinv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
  } else {
    rot = (ang / std::sin(ang)) * vee(A);
    const Mat3 W = skew(rot);
    const double a2 = ang * ang;
    const double coef = (1.0 - ang * std::sin(ang) / (2.0 * (1.0 - std::cos(ang)))) / a2;
    Vinv = Mat3::Identity() - 0.5 * W + coef * W * W;
  }
  return Twist(rot, Vinv * T.t);
}

Mat6 adjoint(const Pose& T) {
  Mat6 A = Mat6::Zero();
  A.topLeftCorner<3, 3>() = T.R;
  A.bottomRightCorner<3, 3>() = T.R;
  A.bottomLeftCorner<3, 3>() = skew(T.t) * T.R;
  return A;
}

Mat6 ad(const Twist& xi) {
  Mat6 A = Mat6::Zero();
  const Mat3 W = skew(xi.rot);
  A.topLeftCorner<3, 3>() = W;
  A.bottomRightCorner<3, 3>() = W;
  A.bottomLeftCorner<3, 3>() = skew(xi.trans);
  return A;
}

Mat6 inv_right_jacobian(const Twist& xi) {
  const double ang = xi.rot.norm();
  if (ang < kSmallJacAngle) {
    const Mat6 a = ad(xi);
    return Mat6::Identity() + 0.5 * a + (1.0 / 12.0) * a * a;
  }
  // Closed form: J_r(xi) = J_l(-xi), invert the left Jacobian blockwise.
  const Vec3 th = -xi.rot;
  const Vec3 rho = -xi.trans;
  const Mat3 W = skew(th);
  const Mat3 P = skew(rho);
  const double s = std::sin(ang), c = std::cos(ang);
  const double a2 = ang * ang, a3 = a2 * ang, a4 = a3 * ang, a5 = a4 * ang;

  const Mat3 Jli =
      Mat3::Identity() - 0.5 * W + ((1.0 - ang * s / (2.0 * (1.0 - c))) / a2) * W * W;

  const double c1 = (ang - s) / a3;
  const double c2 = (1.0 - 0.5 * a2 - c) / a4;
  const double c3 = (ang - s - a3 / 6.0) / a5;
  const Mat3 Q = 0.5 * P + c1 * (W * P + P * W + W * P * W) -
                 c2 * (W * W * P + P * W * W - 3.0 * W * P * W) -
                 0.5 * (c2 - 3.0 * c3) * (W * P * W * W + W * W * P * W);

  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = Jli;
  out.bottomRightCorner<3, 3>() = Jli;
  out.bottomLeftCorner<3, 3>() = -Jli * Q * Jli;
  return out;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1.0;
    out = svd.matrixU() * D * svd.matrixV().transpose();
  }
  return out;
}

Eig3 sym_eig3(const Mat3& M) {
  const Mat3 S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  Eig3 out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  return out;
}

}  // namespace hba
