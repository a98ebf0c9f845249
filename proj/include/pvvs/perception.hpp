#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pvvs/features.hpp"
#include "pvvs/plant.hpp"
#include "pvvs/types.hpp"

namespace pvvs {

/// A straight row of PV panels lying flat at height `array_z`. The array
/// starts at `origin` and extends `length` meters along `direction`; its
/// two lateral edges are `width` apart. The white frame along each lateral
/// edge is `edge_thickness` wide and lies on the array surface.
struct PvScene {
  Vec2 origin{0.0, 0.0};
  Vec2 direction{1.0, 0.0};
  int panel_count = 80;
  double panel_length = 1.0;  // along the row
  double panel_width = 2.0;   // across the row
  double edge_thickness = 0.06;
  double array_z = 0.0;
  double ground_z = -1.0;

  double width() const { return panel_width; }
  double length() const { return panel_count * panel_length; }
  /// Throws Error("config") on non-positive sizes or a zero direction.
  void validate() const;
  /// Unit normal pointing to the array's left (direction rotated +90 deg).
  Vec2 left_normal() const;
};

/// Synthetic RGB-D frame: binary edge mask (0/1) and camera-frame depth
/// (meters, 0 where nothing was hit), row-major.
struct EdgeImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::vector<float> depth;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }
};

/// Rasterizes the lateral edge bands for a level camera at `cam_pose`.
EdgeImage render_edge_mask(const PvScene& scene, const Pose4& cam_pose, const CameraRig& rig);

/// Same for an arbitrary camera orientation R_wc (camera frame to world).
EdgeImage render_edge_mask(const PvScene& scene, const Vec3& cam_position, const Mat3& R_wc,
                           const CameraRig& rig);

/// Camera orientation for a body with the given yaw, pitch and roll.
Mat3 camera_rotation_world(double psi, double pitch, double roll, const CameraRig& rig);

struct ExtractorConfig {
  double depth_min = 0.3;      // depth threshold band, meters
  double depth_max = 4.7;
  int min_pixels = 50;         // per side
  double min_separation_px = 15.0;
  int open_radius = 1;         // square opening of the thresholded mask, 0 disables
};

/// The two fitted lateral edges. `left` is the edge with the smaller r.
struct EdgeObservation {
  LineFeature left;
  LineFeature right;
  bool left_valid = false;
  bool right_valid = false;
  int left_pixels = 0;
  int right_pixels = 0;
  double d_l1l2 = 0.0;  // separation along the central vertical image axis, pixels

  bool any_valid() const { return left_valid || right_valid; }
  bool both_valid() const { return left_valid && right_valid; }
};

/// Binary opening (erosion then dilation) with a (2 radius + 1)^2 square.
/// Pixels outside the image count as set during erosion and as clear
/// during dilation, so bands crossing the border keep their ends.
void binary_open(std::vector<std::uint8_t>& mask, int width, int height, int radius);

/// Depth thresholding, opening, side split and total-least-squares line fits.
/// `hint` (predicted left/right lines) assigns a lone visible edge to a side;
/// without it the sign of r decides.
EdgeObservation extract_edge_lines(const EdgeImage& image, const CameraRig& rig,
                                   const ExtractorConfig& config = {},
                                   const std::optional<std::array<LineFeature, 2>>& hint = {});

struct LineEstimatorConfig {
  Mat4 Q = 1e-3 * Mat4::Identity();
  Mat4 R = Vec4(4.0, 1e-4, 4.0, 1e-4).asDiagonal();
  Mat4 P0 = 10.0 * Mat4::Identity();
  int dropout_horizon = 15;
};

/// Kalman filter over s = (r1, theta1, r2, theta2) with a linear
/// predictor s+ = A s + B (camera twist).
struct LineEstimator {
  Vec4 s = Vec4::Zero();
  Mat4 P = Mat4::Identity();
  Mat4 A = Mat4::Identity();
  Mat46 B = Mat46::Zero();
  Mat4 H = Mat4::Identity();
  Mat4 Q = 1e-3 * Mat4::Identity();
  Mat4 R = Vec4(4.0, 1e-4, 4.0, 1e-4).asDiagonal();
  Mat4 P0 = 10.0 * Mat4::Identity();
  int dropout_horizon = 15;
  bool initialized = false;
  int missed_frames = 0;  // consecutive frames without any valid edge

  static LineEstimator make(const Mat4& A, const Mat46& B, const LineEstimatorConfig& cfg = {});
  std::array<LineFeature, 2> lines() const;
  /// Both edges lost for longer than the dropout horizon.
  bool feature_lost() const { return missed_frames > dropout_horizon; }
};

/// Predict with the camera twist applied over the last frame interval, then
/// correct with whichever sides of `measurement` are valid and finite.
LineEstimator kalman_step(const LineEstimator& est, const EdgeObservation& measurement,
                          const Vec6& cam_twist);

struct DmdSnapshot {
  Vec4 s;
  Vec6 input;
  Vec4 next;
};

struct DmdResult {
  Mat4 A;
  Mat46 B;
  double residual_rms = 0.0;
};

/// Least-squares fit of next = A s + B input. Throws Error("insufficient-data")
/// below 100 snapshots and Error("rank-deficient") when the stacked
/// regressor has rank < 10.
DmdResult dmd_fit(std::span<const DmdSnapshot> snapshots);

struct Midline {
  PointFeature z1;
  PointFeature z2;
  LineFeature line;
  double d_l1l2 = 0.0;
  double p_f = 0.0;
  bool valid = false;
};

struct MidlineConfig {
  double spread = 0.75;        // p_f = spread * d_L1L2
  double border_px = 2.0;      // keep both points this far inside the image
};

/// Feature points on the midline of the estimated edges. Depths come from
/// `depth` at the feature pixels, or `fallback_depth` when unavailable.
Midline midline_features(const LineEstimator& est, const CameraRig& rig,
                         const EdgeImage* depth, double fallback_depth,
                         const MidlineConfig& config = {});

/// Scripted excitation flight used to identify the line predictor.
struct ExcitationConfig {
  double duration = 60.0;
  double dt = 0.05;
  double start_x = 5.0;
  double attitude_amplitude = 0.04;  // roll/pitch wobble, rad
  unsigned seed = 7;
};

struct ExcitationData {
  std::vector<DmdSnapshot> snapshots;  // time ordered
};

ExcitationData record_excitation_flight(const PvScene& scene, const CameraRig& rig,
                                        const DynParams& dyn, const ExtractorConfig& extractor,
                                        const ExcitationConfig& config = {});

/// Records the excitation flight and fits the predictor on all of it.
DmdResult identify_line_model(const PvScene& scene, const CameraRig& rig,
                              const DynParams& dyn, const ExtractorConfig& extractor,
                              const ExcitationConfig& config = {});

}  // namespace pvvs
