#include <cmath>
#include <random>

#include "pvvs/perception.hpp"

namespace pvvs {

namespace {

constexpr int kSubsteps = 5;

struct Wave {
  double amplitude, period, phase;
  double value(double t) const { return amplitude * std::sin(2.0 * kPi * t / period + phase); }
  double cosine(double t) const { return amplitude * std::cos(2.0 * kPi * t / period + phase); }
  double rate(double t) const {
    return amplitude * 2.0 * kPi / period * std::cos(2.0 * kPi * t / period + phase);
  }
};

}  // namespace

ExcitationData record_excitation_flight(const PvScene& scene, const CameraRig& rig,
                                        const DynParams& dyn, const ExtractorConfig& extractor,
                                        const ExcitationConfig& config) {
  if (!(config.duration > 0.0) || !(config.dt > 0.0)) {
    throw Error("config", "excitation duration and dt must be positive");
  }
  std::mt19937 rng(config.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);

  // Commanded speeds sweep their ranges; a gentle pilot keeps the vehicle
  // over the array and near zero mean yaw.
  const Wave vx{0.5, 17.0, phase(rng)};
  const Wave vy{0.3, 11.0, phase(rng)};
  const Wave zt{0.75, 23.0, phase(rng)};
  const Wave wz{0.2, 7.0, phase(rng)};
  const Wave roll{config.attitude_amplitude, 1.3, phase(rng)};
  const Wave pitch{config.attitude_amplitude, 1.9, phase(rng)};
  const Mat6 Tinv = twist_transform(rig).inverse();

  const Vec2 dir = scene.direction.normalized();
  const Vec2 nrm = scene.left_normal();
  const double heading = std::atan2(dir.y(), dir.x());
  State8 x;
  const Vec2 start = scene.origin + config.start_x * dir;
  x.pose = {start.x(), start.y(), scene.array_z + 3.0, heading};

  const int steps = static_cast<int>(std::lround(config.duration / config.dt));
  ExcitationData data;
  data.snapshots.reserve(static_cast<std::size_t>(steps));

  auto observe = [&](const State8& s, double t) {
    const Pose4 cam = camera_pose_world(s.pose, rig);
    const Mat3 R = camera_rotation_world(s.pose.psi, pitch.value(t), roll.value(t), rig);
    return extract_edge_lines(render_edge_mask(scene, Vec3(cam.x, cam.y, cam.z), R, rig), rig,
                              extractor);
  };

  EdgeObservation prev = observe(x, 0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = k * config.dt;
    const Vec2 rel = Vec2(x.pose.x, x.pose.y) - scene.origin;
    const double lateral = nrm.dot(rel);
    const double yaw_err = wrap_angle(x.pose.psi - heading);
    const double height = x.pose.z - scene.array_z;
    BodyVel4 u;
    u.vx = 0.5 + vx.value(t);
    u.vy = vy.value(t) - 0.4 * lateral;
    u.vz = 0.8 * (3.25 + zt.value(t) - height);
    u.wz = wz.cosine(t) - 0.3 * yaw_err;

    Vec6 body_twist = x.vel.twist();
    body_twist(3) = roll.rate(t);
    body_twist(4) = pitch.rate(t);
    const Vec6 cam_twist = Tinv * body_twist;

    for (int s = 0; s < kSubsteps; ++s) x = rk4_step(x, u, config.dt / kSubsteps, dyn);
    const EdgeObservation next = observe(x, t + config.dt);
    if (prev.both_valid() && next.both_valid()) {
      DmdSnapshot sn;
      sn.s << prev.left.r, prev.left.theta, prev.right.r, prev.right.theta;
      sn.input = cam_twist;
      sn.next << next.left.r, next.left.theta, next.right.r, next.right.theta;
      data.snapshots.push_back(sn);
    }
    prev = next;
  }
  return data;
}

DmdResult identify_line_model(const PvScene& scene, const CameraRig& rig, const DynParams& dyn,
                              const ExtractorConfig& extractor, const ExcitationConfig& config) {
  const ExcitationData data = record_excitation_flight(scene, rig, dyn, extractor, config);
  return dmd_fit(data.snapshots);
}

}  // namespace pvvs
