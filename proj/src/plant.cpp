#include "pvvs/plant.hpp"

#include <cmath>

namespace pvvs {

namespace {

DynParams::Array default_pi() {
  DynParams::Array pi{};
  for (int i = 0; i < 4; ++i) pi[i] = 0.6;
  pi[4] = pi[5] = 0.05;
  for (int i = 6; i < 10; ++i) pi[i] = 1.0;
  for (int i = 10; i < 14; ++i) pi[i] = 0.1;
  for (int i = 14; i < 18; ++i) pi[i] = 0.05;
  return pi;
}

struct Jacobians {
  Vec8 f;
  Mat8 fx;
};

Jacobians eval_with_jacobian(const Vec8& x, const Vec4& u, const DynParams& p) {
  const double psi = x(3);
  const Vec4 nu = x.tail<4>();
  const double c = std::cos(psi), s = std::sin(psi);
  const Mat4& Minv = p.mass_inverse();

  Jacobians out;
  out.f.head<4>() = body_jacobian(psi) * nu;
  out.f.tail<4>() = Minv * (u - p.coriolis_times(nu));

  out.fx.setZero();
  out.fx(0, 3) = -s * nu(0) - c * nu(1);
  out.fx(1, 3) = c * nu(0) - s * nu(1);
  out.fx.block<4, 4>(0, 4) = body_jacobian(psi);
  out.fx.block<4, 4>(4, 4) = -Minv * p.coriolis_times_jacobian(nu);
  return out;
}

}  // namespace

DynParams::DynParams() : DynParams(default_pi()) {}

DynParams::DynParams(const Array& pi) : pi_(pi) {
  mass_.setZero();
  for (int i = 0; i < 4; ++i) mass_(i, i) = pi_[i];
  mass_(0, 3) = mass_(3, 0) = pi_[4];
  mass_(1, 3) = mass_(3, 1) = pi_[5];
  for (double v : pi_) {
    if (!std::isfinite(v)) throw Error("singular-M", "non-finite dynamics coefficient");
  }
  Eigen::LLT<Mat4> llt(mass_);
  if (llt.info() != Eigen::Success) {
    throw Error("singular-M", "inertia matrix is not positive definite");
  }
  mass_inv_ = llt.solve(Mat4::Identity());
}

Mat4 DynParams::coriolis(const Vec4& nu) const {
  const double wz = nu(3);
  Mat4 C = Mat4::Zero();
  for (int i = 0; i < 4; ++i) C(i, i) = pi_[6 + i] + pi_[14 + i] * std::abs(nu(i));
  C(0, 1) = -pi_[10] * wz;
  C(1, 0) = pi_[11] * wz;
  C(0, 3) = pi_[12] * wz;
  C(1, 3) = pi_[13] * wz;
  return C;
}

Vec4 DynParams::coriolis_times(const Vec4& nu) const { return coriolis(nu) * nu; }

Mat4 DynParams::coriolis_times_jacobian(const Vec4& nu) const {
  const double vx = nu(0), vy = nu(1), wz = nu(3);
  Mat4 D = Mat4::Zero();
  for (int i = 0; i < 4; ++i) D(i, i) = pi_[6 + i] + 2.0 * pi_[14 + i] * std::abs(nu(i));
  D(0, 1) = -pi_[10] * wz;
  D(0, 3) = -pi_[10] * vy + 2.0 * pi_[12] * wz;
  D(1, 0) = pi_[11] * wz;
  D(1, 3) = pi_[11] * vx + 2.0 * pi_[13] * wz;
  return D;
}

DynParams DynParams::scaled(double fraction) const {
  Array pi = pi_;
  for (double& v : pi) v *= 1.0 + fraction;
  return DynParams(pi);
}

void CameraRig::validate() const {
  const double orth = (R_bc.transpose() * R_bc - Mat3::Identity()).norm();
  if (orth > 1e-9 || std::abs(R_bc.determinant() - 1.0) > 1e-9) {
    throw Error("config", "camera rotation must be orthonormal with determinant +1");
  }
  if (!(lambda > 0.0) || image_width <= 0 || image_height <= 0) {
    throw Error("config", "camera focal length and image size must be positive");
  }
}

Pose4 camera_pose_world(const Pose4& body, const CameraRig& rig) {
  const double c = std::cos(body.psi), s = std::sin(body.psi);
  return {body.x + rig.t_bc.x() * c - rig.t_bc.y() * s,
          body.y + rig.t_bc.x() * s + rig.t_bc.y() * c, body.z + rig.t_bc.z(), body.psi};
}

Mat4 body_jacobian(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat4 J = Mat4::Identity();
  J(0, 0) = c;
  J(0, 1) = -s;
  J(1, 0) = s;
  J(1, 1) = c;
  return J;
}

Vec4 dynamics_accel(const Vec4& nu, const Vec4& nu_ref, const DynParams& params) {
  return params.mass_inverse() * (nu_ref - params.coriolis_times(nu));
}

Vec8 state_derivative(const Vec8& x, const Vec4& u, const DynParams& params) {
  Vec8 dx;
  dx.head<4>() = body_jacobian(x(3)) * x.tail<4>();
  dx.tail<4>() = dynamics_accel(x.tail<4>(), u, params);
  return dx;
}

State8 rk4_step(const State8& x, const BodyVel4& u, double dt, const DynParams& params) {
  const Vec4 uv = u.vec();
  const auto f = [&](const Vec8& s) { return state_derivative(s, uv, params); };
  Vec8 next = rk4(f, x.vec(), dt);
  next(3) = wrap_angle(next(3));
  return State8::from(next);
}

Rk4Linearization rk4_linearize(const Vec8& x, const Vec4& u, double dt,
                               const DynParams& params) {
  Mat84 fu = Mat84::Zero();
  fu.bottomRows<4>() = params.mass_inverse();
  const Mat8 I = Mat8::Identity();

  const Jacobians j1 = eval_with_jacobian(x, u, params);
  const Mat8 s1x = j1.fx;
  const Mat84 s1u = fu;

  const Jacobians j2 = eval_with_jacobian(x + 0.5 * dt * j1.f, u, params);
  const Mat8 s2x = j2.fx * (I + 0.5 * dt * s1x);
  const Mat84 s2u = j2.fx * (0.5 * dt * s1u) + fu;

  const Jacobians j3 = eval_with_jacobian(x + 0.5 * dt * j2.f, u, params);
  const Mat8 s3x = j3.fx * (I + 0.5 * dt * s2x);
  const Mat84 s3u = j3.fx * (0.5 * dt * s2u) + fu;

  const Jacobians j4 = eval_with_jacobian(x + dt * j3.f, u, params);
  const Mat8 s4x = j4.fx * (I + dt * s3x);
  const Mat84 s4u = j4.fx * (dt * s3u) + fu;

  Rk4Linearization out;
  out.next = x + (dt / 6.0) * (j1.f + 2.0 * j2.f + 2.0 * j3.f + j4.f);
  out.A = I + (dt / 6.0) * (s1x + 2.0 * s2x + 2.0 * s3x + s4x);
  out.B = (dt / 6.0) * (s1u + 2.0 * s2u + 2.0 * s3u + s4u);
  return out;
}

}  // namespace pvvs
