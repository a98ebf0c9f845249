#pragma once

#include "pvvs/features.hpp"
#include "pvvs/types.hpp"

namespace pvvs {

struct VsGains {
  Mat2 K = Vec2(150.0, 0.5).asDiagonal();
  Mat6 W = (Vec6() << 1.0, 1.0, 1.0, 50.0, 50.0, 1.0).finished().asDiagonal();
  double k1 = 10.0;
  double k2 = 10.0;
  double v_x_max = 1.0;      // m/s
  double eta_zd = 3.0;       // m
  double eta_zd_rate = 0.0;  // m/s
  LineFeature xi_d{};
  Vec2 xi_d_rate = Vec2::Zero();

  /// Throws Error("config") unless K and W are symmetric positive definite
  /// and k1, k2 are positive.
  void validate() const;
};

/// xi_d - alpha(xi) with alpha(r, theta) = (r / r_max, theta), applied to both.
Vec2 feature_error(const LineFeature& xi_d, const LineFeature& xi, double r_max);

/// W^-1 J^T (J W^-1 J^T)^-1. Throws Error("rank-deficient") when
/// J W^-1 J^T has condition number above 1e12.
Mat62 weighted_pinv(const Mat26& J, const Mat6& W);

/// (v_xd, 0, v_zd, 0, 0, 0) with v_xd = v_x_max / (1 + k1 |err|) and
/// v_zd = eta_zd_rate + k2 tanh(eta_zd - eta_z).
Vec6 desired_velocities(const Vec2& xi_err, const VsGains& gains, double eta_z);

struct VsCommand {
  BodyVel4 nu_c4;
  Vec6 nu_c6;
  /// Commanded roll and pitch rates, which the vehicle cannot follow.
  double residual_wx = 0.0;
  double residual_wy = 0.0;
};

/// nu_c = J+ (xi_d_rate + K err) + (I - J+ J) nu_d.
VsCommand control_law(const Mat26& J, const Vec2& xi_err, const Vec2& xi_d_rate,
                      const Vec6& nu_d, const VsGains& gains);

}  // namespace pvvs
