#include <algorithm>
#include <cmath>

#include "pvvs/perception.hpp"

namespace pvvs {

namespace {

bool finite_line(const LineFeature& l) { return std::isfinite(l.r) && std::isfinite(l.theta); }

// Line angles are defined modulo pi.
double wrap_half_turn(double a) {
  double w = std::remainder(a, kPi);
  if (w <= -kPi / 2) w += kPi;
  return w;
}

}  // namespace

LineEstimator LineEstimator::make(const Mat4& A, const Mat46& B, const LineEstimatorConfig& cfg) {
  LineEstimator est;
  est.A = A;
  est.B = B;
  est.Q = cfg.Q;
  est.R = cfg.R;
  est.P0 = cfg.P0;
  est.P = cfg.P0;
  est.dropout_horizon = cfg.dropout_horizon;
  return est;
}

std::array<LineFeature, 2> LineEstimator::lines() const {
  return {LineFeature{s(0), s(1)}, LineFeature{s(2), s(3)}};
}

LineEstimator kalman_step(const LineEstimator& est, const EdgeObservation& measurement,
                          const Vec6& cam_twist) {
  LineEstimator out = est;
  const bool left_ok = measurement.left_valid && finite_line(measurement.left);
  const bool right_ok = measurement.right_valid && finite_line(measurement.right);
  out.missed_frames = (left_ok || right_ok) ? 0 : est.missed_frames + 1;

  if (!est.initialized) {
    if (left_ok && right_ok) {
      out.s << measurement.left.r, measurement.left.theta, measurement.right.r,
          measurement.right.theta;
      out.P = est.P0;
      out.initialized = true;
    }
    return out;
  }

  Vec4 s_pred = est.A * est.s;
  if (cam_twist.allFinite()) s_pred += est.B * cam_twist;
  Mat4 P_pred = est.A * est.P * est.A.transpose() + est.Q;
  P_pred = 0.5 * (P_pred + P_pred.transpose()).eval();
  out.s = s_pred;
  out.P = P_pred;
  if (!left_ok && !right_ok) return out;

  // Rows of H that are observed this frame.
  int idx[4];
  int m = 0;
  if (left_ok) {
    idx[m++] = 0;
    idx[m++] = 1;
  }
  if (right_ok) {
    idx[m++] = 2;
    idx[m++] = 3;
  }
  const Vec4 z_full(measurement.left.r, measurement.left.theta, measurement.right.r,
                    measurement.right.theta);
  Eigen::MatrixXd H(m, 4), R(m, m);
  Eigen::VectorXd innov(m);
  const Vec4 hs = est.H * s_pred;
  for (int a = 0; a < m; ++a) {
    H.row(a) = est.H.row(idx[a]);
    innov(a) = z_full(idx[a]) - hs(idx[a]);
    if (idx[a] % 2 == 1) innov(a) = wrap_half_turn(innov(a));
    for (int b = 0; b < m; ++b) R(a, b) = est.R(idx[a], idx[b]);
  }
  const Eigen::MatrixXd S = H * P_pred * H.transpose() + R;
  const Eigen::MatrixXd K = S.ldlt().solve(H * P_pred).transpose();
  out.s = s_pred + K * innov;
  // Joseph form of P = (I - K H) P_pred; identical for the optimal gain.
  const Mat4 IKH = Mat4::Identity() - K * H;
  Mat4 P = IKH * P_pred * IKH.transpose() + K * R * K.transpose();
  out.P = 0.5 * (P + P.transpose());
  return out;
}

DmdResult dmd_fit(std::span<const DmdSnapshot> snapshots) {
  constexpr int kRegressors = 10;
  const auto n = static_cast<Eigen::Index>(snapshots.size());
  if (n < 10 * kRegressors) {
    throw Error("insufficient-data", "need at least 100 snapshots, got " + std::to_string(n));
  }
  Eigen::MatrixXd X(n, kRegressors), Y(n, 4);
  for (Eigen::Index k = 0; k < n; ++k) {
    const DmdSnapshot& sn = snapshots[static_cast<std::size_t>(k)];
    X.row(k).head<4>() = sn.s.transpose();
    X.row(k).tail<6>() = sn.input.transpose();
    Y.row(k) = sn.next.transpose();
  }
  if (!X.allFinite() || !Y.allFinite()) throw Error("non-finite", "snapshot data is not finite");

  Eigen::Matrix<double, kRegressors, 1> scale;
  for (int c = 0; c < kRegressors; ++c) {
    const double rms = X.col(c).norm() / std::sqrt(static_cast<double>(n));
    scale(c) = rms > 0.0 ? rms : 1.0;
    X.col(c) /= scale(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
  if (sv(0) == 0.0 || rank < kRegressors) {
    throw Error("rank-deficient", "regressor rank " + std::to_string(rank) + " < 10");
  }
  const Eigen::MatrixXd G = svd.solve(Y);  // kRegressors x 4, scaled rows
  Eigen::MatrixXd AB = G.transpose();
  for (int c = 0; c < kRegressors; ++c) AB.col(c) /= scale(c);
  for (int c = 0; c < kRegressors; ++c) X.col(c) *= scale(c);

  DmdResult res;
  res.A = AB.leftCols<4>();
  res.B = AB.rightCols<6>();
  const Eigen::MatrixXd E = Y - X * AB.transpose();
  res.residual_rms = std::sqrt(E.squaredNorm() / static_cast<double>(E.size()));
  return res;
}

Midline midline_features(const LineEstimator& est, const CameraRig& rig, const EdgeImage* depth,
                         double fallback_depth, const MidlineConfig& config) {
  Midline out;
  if (!est.initialized || !est.s.allFinite()) return out;
  const auto [l1, l2] = est.lines();
  const double c1 = std::cos(l1.theta), c2 = std::cos(l2.theta);
  if (std::abs(c1) < 1e-6 || std::abs(c2) < 1e-6) return out;
  const double v1 = l1.r / c1, v2 = l2.r / c2;
  const double v_o = 0.5 * (v1 + v2);
  const double theta_m = 0.5 * (l1.theta + l2.theta);
  out.d_l1l2 = std::abs(v2 - v1);

  const double su = rig.cx() - config.border_px, sv = rig.cy() - config.border_px;
  double p_max = std::numeric_limits<double>::infinity();
  const double ct = std::abs(std::cos(theta_m)), st = std::abs(std::sin(theta_m));
  if (ct > 0.0) p_max = std::min(p_max, su / ct);
  if (st > 0.0) p_max = std::min(p_max, (sv - std::abs(v_o)) / st);
  out.p_f = std::max(1.0, std::min(config.spread * out.d_l1l2, p_max));

  // The points are placed along -theta_m so that the line through them
  // has orientation theta_m in the image convention.
  auto [z1, z2] = points_from_line(0.0, v_o, -theta_m, out.p_f);
  auto attach_depth = [&](PointFeature& z) {
    z.z = fallback_depth;
    if (depth == nullptr || depth->depth.empty()) return;
    const double fi = std::floor(z.u + rig.cx()), fj = std::floor(z.v + rig.cy());
    if (fi < 0 || fj < 0 || fi >= depth->width || fj >= depth->height) return;
    const float d = depth->depth[depth->index(static_cast<int>(fi), static_cast<int>(fj))];
    if (d > 0.f && std::isfinite(d)) z.z = d;
  };
  attach_depth(z1);
  attach_depth(z2);
  out.z1 = z1;
  out.z2 = z2;
  out.line = line_from_points(z1, z2);
  out.valid = !est.feature_lost() && out.z1.z > 0.0 && out.z2.z > 0.0;
  return out;
}

}  // namespace pvvs
