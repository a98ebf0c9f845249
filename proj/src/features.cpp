#include "pvvs/features.hpp"

#include <cmath>

namespace pvvs {

namespace {

struct CanonicalDirection {
  double du;
  double dv;
  double len2;
  double sign;  // +1 when (du, dv) = z2 - z1, -1 when reversed
};

// Orients z2 - z1 so that atan2(-dv, du) lands in (-pi/2, pi/2].
CanonicalDirection canonical_direction(const PointFeature& z1, const PointFeature& z2) {
  double du = z2.u - z1.u;
  double dv = z2.v - z1.v;
  const double len2 = du * du + dv * dv;
  if (!(len2 > 0.0) || !std::isfinite(len2)) {
    throw Error("coincident-points", "line needs two distinct finite points");
  }
  double sign = 1.0;
  const double raw = std::atan2(-dv, du);
  if (raw > 0.5 * kPi || raw <= -0.5 * kPi) {
    du = -du;
    dv = -dv;
    sign = -1.0;
  }
  return {du, dv, len2, sign};
}

}  // namespace

Mat6 TwistTransform::inverse() const {
  const Mat3 R = T.topLeftCorner<3, 3>();
  const Mat3 tR = T.topRightCorner<3, 3>();
  Mat6 inv = Mat6::Zero();
  inv.topLeftCorner<3, 3>() = R.transpose();
  // [t]x R = tR  =>  -R^T [t]x = -R^T tR R^T
  inv.topRightCorner<3, 3>() = -R.transpose() * tR * R.transpose();
  inv.bottomRightCorner<3, 3>() = R.transpose();
  return inv;
}

Mat3 skew(const Vec3& t) {
  Mat3 S;
  S << 0.0, -t.z(), t.y(),
       t.z(), 0.0, -t.x(),
       -t.y(), t.x(), 0.0;
  return S;
}

PointFeature project_point(const Vec3& p_c, double lambda) {
  if (!(p_c.z() > 0.0)) throw Error("behind-camera", "point has non-positive depth");
  const double k = lambda / p_c.z();
  return {k * p_c.x(), k * p_c.y(), p_c.z()};
}

Mat26 point_interaction_matrix(const PointFeature& zeta, double lambda) {
  if (!(zeta.z > 0.0)) throw Error("zero-depth", "feature depth must be positive");
  const double u = zeta.u, v = zeta.v, z = zeta.z, l = lambda;
  Mat26 L;
  L << -l / z, 0.0, u / z, u * v / l, -(l + u * u / l), v,
       0.0, -l / z, v / z, l + v * v / l, -u * v / l, -u;
  return L;
}

Mat46 feature_jacobian(const PointFeature& z1, const PointFeature& z2, double lambda) {
  Mat46 J;
  J.topRows<2>() = point_interaction_matrix(z1, lambda);
  J.bottomRows<2>() = point_interaction_matrix(z2, lambda);
  return J;
}

TwistTransform twist_transform(const CameraRig& rig) {
  TwistTransform out;
  out.T.setZero();
  out.T.topLeftCorner<3, 3>() = rig.R_bc;
  out.T.topRightCorner<3, 3>() = skew(rig.t_bc) * rig.R_bc;
  out.T.bottomRightCorner<3, 3>() = rig.R_bc;
  return out;
}

LineFeature line_from_points(const PointFeature& z1, const PointFeature& z2) {
  const CanonicalDirection d = canonical_direction(z1, z2);
  const double len = std::sqrt(d.len2);
  return {(z1.v * d.du - z1.u * d.dv) / len, std::atan2(-d.dv, d.du)};
}

Mat24 line_jacobian(const LineFeature& xi, const PointFeature& z1, const PointFeature& z2) {
  const CanonicalDirection d = canonical_direction(z1, z2);
  const double s = d.sign;
  const double dth_du1 = -s * d.dv / d.len2;
  const double dth_dv1 = s * d.du / d.len2;
  const double st = std::sin(xi.theta), ct = std::cos(xi.theta);
  const double lever = z1.u * ct - z1.v * st;

  Mat24 J;
  J(1, 0) = dth_du1;
  J(1, 1) = dth_dv1;
  J(1, 2) = -dth_du1;
  J(1, 3) = -dth_dv1;
  J(0, 0) = st + lever * dth_du1;
  J(0, 1) = ct + lever * dth_dv1;
  J(0, 2) = -lever * dth_du1;
  J(0, 3) = -lever * dth_dv1;
  return J;
}

Mat26 compact_jacobian(const LineFeature& xi, const PointFeature& z1,
                       const PointFeature& z2, const CameraRig& rig) {
  return line_jacobian(xi, z1, z2) * feature_jacobian(z1, z2, rig.lambda) *
         twist_transform(rig).inverse();
}

std::pair<PointFeature, PointFeature> points_from_line(double u_o, double v_o,
                                                       double theta, double p_f) {
  const double du = p_f * std::cos(theta), dv = p_f * std::sin(theta);
  return {PointFeature{u_o + du, v_o + dv, 0.0}, PointFeature{u_o - du, v_o - dv, 0.0}};
}

}  // namespace pvvs
