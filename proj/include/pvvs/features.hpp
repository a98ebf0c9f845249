#pragma once

#include <utility>

#include "pvvs/plant.hpp"
#include "pvvs/types.hpp"

namespace pvvs {

// Image coordinates used by every feature type are centered on the
// principal point: u to the right, v down, in pixels. Raster pixel (i, j)
// has its center at u = i + 0.5 - cx, v = j + 0.5 - cy.

/// A projected point with the camera-frame depth it was observed at.
struct PointFeature {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Image line u sin(theta) + v cos(theta) = r, theta in (-pi/2, pi/2].
struct LineFeature {
  double r = 0.0;
  double theta = 0.0;

  Vec2 vec() const { return {r, theta}; }
};

/// Maps camera-frame twists to body-frame twists: T = [R, [t]x R; 0, R].
struct TwistTransform {
  Mat6 T;
  Mat6 inverse() const;
};

Mat3 skew(const Vec3& t);

/// Pinhole projection; throws Error("behind-camera") when p_c.z <= 0.
PointFeature project_point(const Vec3& p_c, double lambda);

/// d(u, v)/dt of a static scene point for a camera twist (v; w) expressed
/// in the camera frame. Throws Error("zero-depth") when zeta.z <= 0.
Mat26 point_interaction_matrix(const PointFeature& zeta, double lambda);

/// Two point interaction matrices stacked as rows (u1, v1, u2, v2).
Mat46 feature_jacobian(const PointFeature& z1, const PointFeature& z2, double lambda);

TwistTransform twist_transform(const CameraRig& rig);

/// Polar line through two image points. Throws Error("coincident-points").
LineFeature line_from_points(const PointFeature& z1, const PointFeature& z2);

/// d(r, theta)/d(u1, v1, u2, v2) of line_from_points.
Mat24 line_jacobian(const LineFeature& xi, const PointFeature& z1, const PointFeature& z2);

/// d(r, theta)/dt for a 6-component body twist.
Mat26 compact_jacobian(const LineFeature& xi, const PointFeature& z1,
                       const PointFeature& z2, const CameraRig& rig);

/// Points (u_o +- p_f cos(theta), v_o +- p_f sin(theta)); depth left at 0.
std::pair<PointFeature, PointFeature> points_from_line(double u_o, double v_o,
                                                       double theta, double p_f);

}  // namespace pvvs
