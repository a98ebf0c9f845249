#include "pvvs/vs_controller.hpp"

#include <cmath>

namespace pvvs {

namespace {

template <int N>
bool spd(const Eigen::Matrix<double, N, N>& M) {
  if (!M.allFinite() || (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(M);
  return llt.info() == Eigen::Success;
}

}  // namespace

void VsGains::validate() const {
  if (!spd<2>(K)) throw Error("config", "K must be symmetric positive definite");
  if (!spd<6>(W)) throw Error("config", "W must be symmetric positive definite");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw Error("config", "k1 and k2 must be positive");
  if (!(v_x_max > 0.0)) throw Error("config", "v_x_max must be positive");
}

Vec2 feature_error(const LineFeature& xi_d, const LineFeature& xi, double r_max) {
  return {xi_d.r / r_max - xi.r / r_max, xi_d.theta - xi.theta};
}

Mat62 weighted_pinv(const Mat26& J, const Mat6& W) {
  const Eigen::LDLT<Mat6> wl(W);
  const Mat62 WinvJt = wl.solve(J.transpose());
  const Mat2 G = J * WinvJt;
  const Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (G + G.transpose()));
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  if (!G.allFinite() || !(lo > 0.0) || hi / lo > 1e12) {
    throw Error("rank-deficient", "feature Jacobian is degenerate");
  }
  return WinvJt * G.inverse();
}

Vec6 desired_velocities(const Vec2& xi_err, const VsGains& gains, double eta_z) {
  Vec6 nu = Vec6::Zero();
  nu(0) = gains.v_x_max / (1.0 + gains.k1 * xi_err.norm());
  nu(2) = gains.eta_zd_rate + gains.k2 * std::tanh(gains.eta_zd - eta_z);
  return nu;
}

VsCommand control_law(const Mat26& J, const Vec2& xi_err, const Vec2& xi_d_rate,
                      const Vec6& nu_d, const VsGains& gains) {
  const Mat62 Jp = weighted_pinv(J, gains.W);
  const Mat6 N = Mat6::Identity() - Jp * J;
  VsCommand out;
  out.nu_c6 = Jp * (xi_d_rate + gains.K * xi_err) + N * nu_d;
  out.nu_c4 = {out.nu_c6(0), out.nu_c6(1), out.nu_c6(2), out.nu_c6(5)};
  out.residual_wx = out.nu_c6(3);
  out.residual_wy = out.nu_c6(4);
  return out;
}

}  // namespace pvvs
