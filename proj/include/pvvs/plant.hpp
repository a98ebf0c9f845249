#pragma once

#include <array>

#include "pvvs/types.hpp"

namespace pvvs {

/// Coefficients of the velocity-tracking dynamics M(nu) nu_dot + C(nu) nu = nu_ref.
///
/// Layout of `pi` (0-based):
///   [0..3]   M diagonal
///   [4], [5] M yaw couplings m14 = m41, m24 = m42
///   [6..9]   C diagonal (linear drag, DC gain)
///   [10..13] yaw-rate couplings c12 = -pi[10] wz, c21 = pi[11] wz,
///            c14 = pi[12] wz, c24 = pi[13] wz
///   [14..17] quadratic drag, added to the C diagonal as pi[14+i] |nu_i|
class DynParams {
 public:
  static constexpr int kCount = 18;
  using Array = std::array<double, kCount>;

  /// Default coefficients (unit DC gain, ~0.6 s time constant).
  DynParams();
  /// Throws Error("singular-M") unless M is symmetric positive definite.
  explicit DynParams(const Array& pi);

  const Array& pi() const { return pi_; }
  const Mat4& mass() const { return mass_; }
  const Mat4& mass_inverse() const { return mass_inv_; }
  Mat4 coriolis(const Vec4& nu) const;
  /// C(nu) nu and its Jacobian with respect to nu.
  Vec4 coriolis_times(const Vec4& nu) const;
  Mat4 coriolis_times_jacobian(const Vec4& nu) const;

  /// Every coefficient scaled by (1 + fraction); models an unmodeled
  /// change in mass and drag.
  DynParams scaled(double fraction) const;

 private:
  Array pi_;
  Mat4 mass_;
  Mat4 mass_inv_;
};

/// Camera mounting and intrinsics. Camera frame: x along the image u axis,
/// y along v, z along the optical axis.
struct CameraRig {
  Vec3 t_bc{0.1, 0.0, -0.05};
  /// Rotation taking camera-frame vectors into the body frame. The default
  /// looks straight down with image u along the body x axis.
  Mat3 R_bc = Vec3(1.0, -1.0, -1.0).asDiagonal();
  double lambda = 300.0;
  int image_width = 640;
  int image_height = 480;

  /// Throws Error("config") on a non-rotation R_bc or non-positive sizes.
  void validate() const;
  double cx() const { return 0.5 * image_width; }
  double cy() const { return 0.5 * image_height; }
};

/// Camera location in the world given the body pose (roll = pitch = 0).
Pose4 camera_pose_world(const Pose4& body_pose, const CameraRig& rig);

/// Maps body velocities to world pose rates.
Mat4 body_jacobian(double psi);

/// nu_dot solving M nu_dot + C(nu) nu = nu_ref.
Vec4 dynamics_accel(const Vec4& nu, const Vec4& nu_ref, const DynParams& params);

/// Continuous-time rate of the stacked (pose, velocity) state.
Vec8 state_derivative(const Vec8& x, const Vec4& u, const DynParams& params);

/// One classical Runge-Kutta step of x' = f(x) (no angle wrapping).
template <class V, class F>
V rk4(const F& f, const V& x, double dt) {
  const V k1 = f(x);
  const V k2 = f(V(x + 0.5 * dt * k1));
  const V k3 = f(V(x + 0.5 * dt * k2));
  const V k4 = f(V(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Plant step with zero-order-hold input; yaw wrapped into (-pi, pi].
State8 rk4_step(const State8& x, const BodyVel4& u, double dt, const DynParams& params);

/// RK4 step without yaw wrapping, plus its exact sensitivities
/// d x_next / d x and d x_next / d u. Used by the optimal control solver.
struct Rk4Linearization {
  Vec8 next;
  Mat8 A;
  Mat84 B;
};
Rk4Linearization rk4_linearize(const Vec8& x, const Vec4& u, double dt,
                               const DynParams& params);

}  // namespace pvvs
