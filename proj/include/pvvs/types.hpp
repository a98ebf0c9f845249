#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pvvs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat46 = Eigen::Matrix<double, 4, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;
using Mat84 = Eigen::Matrix<double, 8, 4>;

inline constexpr double kPi = std::numbers::pi;

/// Error raised for violated preconditions (singular matrices, degenerate
/// geometry, bad configuration). Carries a short machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// World-frame pose (x, y, z, yaw).
struct Pose4 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double psi = 0.0;

  Vec4 vec() const { return {x, y, z, psi}; }
  static Pose4 from(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// Body-frame velocity (vx, vy, vz, yaw rate) of the velocity-tracking
/// autopilot interface.
struct BodyVel4 {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;
  double wz = 0.0;

  Vec4 vec() const { return {vx, vy, vz, wz}; }
  static BodyVel4 from(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }

  /// Full 6-component twist with zero roll and pitch rates.
  Vec6 twist() const {
    Vec6 t;
    t << vx, vy, vz, 0.0, 0.0, wz;
    return t;
  }
};

/// Plant state in (pose, velocity) order.
struct State8 {
  Pose4 pose;
  BodyVel4 vel;

  Vec8 vec() const {
    Vec8 v;
    v << pose.vec(), vel.vec();
    return v;
  }
  static State8 from(const Vec8& v) {
    return {Pose4::from(v.head<4>()), BodyVel4::from(v.tail<4>())};
  }
};

}  // namespace pvvs
