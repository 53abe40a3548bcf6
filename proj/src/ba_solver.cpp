#include "hba/ba_solver.hpp"

#include <cmath>
#include <cstdio>

#include "hba/errors.hpp"

namespace hba {

namespace {

constexpr double kEigenGapRel = 1e-10;
constexpr double kLambdaMax = 1e12;
constexpr double kFallbackInfo = 1e3;

// Per-voxel per-frame quantities entering the gradient and Hessian. All of
// them are linear in the frame's cluster statistics.
struct FrameTerms {
  int state = -1;  // frame_id - 1; -1 marks the anchored pose
  Vec6 grad = Vec6::Zero();
  Vec6 J = Vec6::Zero();   // plane-residual sum row
  Vec6 G2 = Vec6::Zero();  // eigenvector-coupling rows
  Vec6 G3 = Vec6::Zero();
  Mat6 diag = Mat6::Zero();
};

Vec6 w_row(const Mat3& P, const Vec3& v, double Nf, const Vec3& qa, double ca, const Vec3& qb) {
  Vec6 r;
  r.head<3>() = (P * qa).cross(qb) + ca * v.cross(qb);
  r.tail<3>() = (qa.dot(v) + Nf * ca) * qb;
  return r;
}

void check_window_input(const std::vector<PlaneVoxel>& voxels, const Trajectory& poses) {
  if (voxels.empty()) throw NoFeatures("window has no planar features");
  if (poses.size() < 2) throw ConfigError("a window needs at least two poses");
}

Trajectory apply_step(const Trajectory& poses, const VecX& delta) {
  Trajectory out = poses;
  for (std::size_t k = 1; k < poses.size(); ++k) {
    const Vec6 d = delta.segment<6>(6 * (k - 1));
    out[k] = compose(poses[k], exp_map(Twist::from_vec(d)));
  }
  return out;
}

MatX masked_hessian(const MatX& H, int stride, int n_states) {
  if (stride <= 0) return H;
  MatX A = MatX::Zero(H.rows(), H.cols());
  for (int a = 0; a < n_states; ++a) {
    for (int b = 0; b < n_states; ++b) {
      // States map to pose indices a+1, b+1; blocks follow pose grouping.
      if ((a + 1) / stride == (b + 1) / stride)
        A.block<6, 6>(6 * a, 6 * b) = H.block<6, 6>(6 * a, 6 * b);
    }
  }
  return A;
}

}  // namespace

double ba_cost(const std::vector<PlaneVoxel>& voxels, const Trajectory& poses) {
  double cost = 0.0;
  for (const PlaneVoxel& v : voxels) {
    const PointCluster merged = merge_into_global(v, poses);
    // Scatter is PSD; rounding can push the smallest eigenvalue below zero.
    cost += std::max(sym_eig3(merged.scatter()).values(0), 0.0);
  }
  if (!std::isfinite(cost)) throw NonFiniteCost("bundle cost is not finite");
  return cost;
}

BaLinearization ba_gradient_hessian(const std::vector<PlaneVoxel>& voxels,
                                    const Trajectory& poses) {
  check_window_input(voxels, poses);
  const int n_states = static_cast<int>(poses.size()) - 1;
  BaLinearization out;
  out.grad = VecX::Zero(6 * n_states);
  out.hessian = MatX::Zero(6 * n_states, 6 * n_states);

  std::vector<FrameTerms> terms;
  for (const PlaneVoxel& voxel : voxels) {
    const PointCluster merged = merge_into_global(voxel, poses);
    const double N = static_cast<double>(merged.count);
    const Vec3 mu = merged.mean();
    const Eig3 eig = sym_eig3(merged.scatter());
    out.cost += std::max(eig.values(0), 0.0);

    if (eig.values(1) - eig.values(0) < kEigenGapRel * eig.values(2)) {
      ++out.eigengap_skips;
      continue;
    }
    const Vec3 u1 = eig.vectors.col(0), u2 = eig.vectors.col(1), u3 = eig.vectors.col(2);
    const double c_couple2 = 2.0 / (eig.values(0) - eig.values(1));
    const double c_couple3 = 2.0 / (eig.values(0) - eig.values(2));

    terms.clear();
    terms.reserve(voxel.frame_ids.size());
    for (std::size_t i = 0; i < voxel.frame_ids.size(); ++i) {
      const int f = voxel.frame_ids[i];
      const Pose& L = poses[f];
      const PointCluster& c = voxel.clusters[i];
      const Mat3& P = c.outer_sum;
      const Vec3& v = c.sum;
      const double Nf = static_cast<double>(c.count);

      const Vec3 q1 = L.R.transpose() * u1;
      const Vec3 q2 = L.R.transpose() * u2;
      const Vec3 q3 = L.R.transpose() * u3;
      const double c1 = u1.dot(L.t - mu);
      const double c2 = u2.dot(L.t - mu);
      const double c3 = u3.dot(L.t - mu);

      FrameTerms t;
      t.state = f - 1;
      t.grad = (2.0 / N) * w_row(P, v, Nf, q1, c1, q1);
      t.J.head<3>() = v.cross(q1);
      t.J.tail<3>() = Nf * q1;
      t.G2 = (w_row(P, v, Nf, q1, c1, q2) + w_row(P, v, Nf, q2, c2, q1)) / N;
      t.G3 = (w_row(P, v, Nf, q1, c1, q3) + w_row(P, v, Nf, q3, c3, q1)) / N;

      const Mat3 S1 = skew(q1);
      Mat6 Q = Mat6::Zero();
      Q.topLeftCorner<3, 3>() = S1 * P * S1.transpose();
      Q.topRightCorner<3, 3>() = v.cross(q1) * q1.transpose();
      Q.bottomLeftCorner<3, 3>() = Q.topRightCorner<3, 3>().transpose();
      Q.bottomRightCorner<3, 3>() = Nf * q1 * q1.transpose();

      const Vec3 w = P * q1 + c1 * v;
      const double s = q1.dot(v) + Nf * c1;
      Mat6 B = Mat6::Zero();
      B.topLeftCorner<3, 3>() =
          0.5 * (w * q1.transpose() + q1 * w.transpose()) - q1.dot(w) * Mat3::Identity();
      B.topRightCorner<3, 3>() = -0.5 * s * S1;
      B.bottomLeftCorner<3, 3>() = 0.5 * s * S1;
      t.diag = (2.0 / N) * (Q + B);
      terms.push_back(t);
    }

    for (const FrameTerms& ta : terms) {
      if (ta.state < 0) continue;
      out.grad.segment<6>(6 * ta.state) += ta.grad;
      out.hessian.block<6, 6>(6 * ta.state, 6 * ta.state) += ta.diag;
      for (const FrameTerms& tb : terms) {
        if (tb.state < 0) continue;
        out.hessian.block<6, 6>(6 * ta.state, 6 * tb.state) +=
            (-2.0 / (N * N)) * ta.J * tb.J.transpose() +
            c_couple2 * ta.G2 * tb.G2.transpose() + c_couple3 * ta.G3 * tb.G3.transpose();
      }
    }
  }
  if (!std::isfinite(out.cost) || !out.grad.allFinite() || !out.hessian.allFinite())
    throw NonFiniteCost("bundle linearization is not finite");
  return out;
}

WindowResult solve_window(const std::vector<PlaneVoxel>& voxels, const Trajectory& init,
                          const BaParams& params) {
  check_window_input(voxels, init);
  if ((init[0].R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      init[0].t.cwiseAbs().maxCoeff() > 1e-9)
    throw ConfigError("window poses must be anchored: pose 0 is not identity");

  WindowResult result;
  result.poses = init;
  result.poses[0] = Pose();

  BaLinearization lin = ba_gradient_hessian(voxels, result.poses);
  result.cost_history.push_back(lin.cost);
  result.eigengap_skips = lin.eigengap_skips;
  const int n_states = static_cast<int>(init.size()) - 1;

  double lambda = params.lambda_init;
  for (int iter = 0; iter < params.max_iter; ++iter) {
    if (lin.grad.cwiseAbs().maxCoeff() < params.grad_tol) {
      result.grad_converged = true;
      break;
    }
    const MatX A = masked_hessian(lin.hessian, params.block_diag_stride, n_states);
    bool stepped = false;
    double step_inf = 0.0;
    while (lambda <= kLambdaMax) {
      MatX damped = A;
      damped.diagonal().array() += lambda;
      const VecX delta = damped.ldlt().solve(-lin.grad);
      if (!delta.allFinite()) {
        lambda *= params.lambda_up;
        continue;
      }
      const Trajectory trial = apply_step(result.poses, delta);
      const double trial_cost = ba_cost(voxels, trial);
      if (trial_cost < lin.cost) {
        result.poses = trial;
        lambda = std::max(lambda / params.lambda_dn, 1e-12);
        step_inf = delta.cwiseAbs().maxCoeff();
        lin = ba_gradient_hessian(voxels, result.poses);
        result.cost_history.push_back(lin.cost);
        result.eigengap_skips += lin.eigengap_skips;
        result.iterations = iter + 1;
        stepped = true;
        break;
      }
      lambda *= params.lambda_up;
    }
    if (!stepped) break;
    if (step_inf < params.step_tol) {
      result.step_converged = true;
      break;
    }
  }

  result.hessian = lin.hessian;
  result.final_cost = lin.cost;
  return result;
}

MatX window_covariance(const WindowResult& result) {
  const Eigen::Index d = result.hessian.rows();
  MatX damped = result.hessian;
  const double eps = 1e-6 * damped.trace() / static_cast<double>(d);
  damped.diagonal().array() += eps;
  return damped.ldlt().solve(MatX::Identity(d, d));
}

Mat6 relative_pose_information(const WindowResult& result, int j) {
  return relative_pose_information(result, window_covariance(result), j);
}

Mat6 relative_pose_information(const WindowResult& result, const MatX& cov, int j) {
  const int n = static_cast<int>(result.poses.size());
  if (j < 0 || j + 1 >= n) throw ConfigError("relative pose index out of range");

  const Pose Z = relative(result.poses[j], result.poses[j + 1]);
  Mat6 omega;
  if (j == 0) {
    omega = cov.block<6, 6>(0, 0);
  } else {
    Eigen::Matrix<double, 6, 12> A;
    A.leftCols<6>() = -adjoint(Z.inverse());
    A.rightCols<6>() = Mat6::Identity();
    Eigen::Matrix<double, 12, 12> sub;
    const int ra = 6 * (j - 1), rb = 6 * j;
    sub.topLeftCorner<6, 6>() = cov.block<6, 6>(ra, ra);
    sub.topRightCorner<6, 6>() = cov.block<6, 6>(ra, rb);
    sub.bottomLeftCorner<6, 6>() = cov.block<6, 6>(rb, ra);
    sub.bottomRightCorner<6, 6>() = cov.block<6, 6>(rb, rb);
    omega = A * sub * A.transpose();
  }

  const double eps = 1e-6 * result.hessian.trace() / static_cast<double>(result.hessian.rows());
  Mat6 damped = omega;
  damped.diagonal().array() += eps;
  Mat6 info = damped.ldlt().solve(Mat6::Identity());
  info = 0.5 * (info + info.transpose()).eval();

  const bool ok = info.allFinite() && Eigen::LLT<Mat6>(info).info() == Eigen::Success;
  if (!ok) {
    std::fprintf(stderr, "warning: relative pose information for pair (%d,%d) not positive "
                         "definite, using scaled identity\n", j, j + 1);
    return kFallbackInfo * Mat6::Identity();
  }
  return info;
}

}  // namespace hba
