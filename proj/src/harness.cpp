#include "pvvs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace pvvs {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

BodyVel4 hold_command(double v_zd) { return {0.0, 0.0, v_zd, 0.0}; }

}  // namespace

std::string_view to_string(ControllerMode m) {
  return m == ControllerMode::kVsOnly ? "vs" : "vs-nmpc";
}

ControllerMode parse_mode(std::string_view s) {
  if (s == "vs" || s == "vs-only") return ControllerMode::kVsOnly;
  if (s == "vs-nmpc" || s == "vs+nmpc") return ControllerMode::kVsNmpc;
  throw Error("config", "unknown controller mode '" + std::string(s) + "'");
}

void ScenarioConfig::validate() const {
  scene.validate();
  rig.validate();
  gains.validate();
  NmpcProblem p = nmpc;
  p.dyn = dyn;
  p.validate();
  if (!(duration > 0.0)) throw Error("config", "duration must be positive");
  if (!(control_period > 0.0)) throw Error("config", "control period must be positive");
  if (std::abs(control_period - nmpc.dt) > 1e-12) {
    throw Error("config", "control period must equal the NMPC sampling time");
  }
  if (plant_substeps < 1) throw Error("config", "plant_substeps must be at least 1");
  if (!(model_mismatch > -1.0)) throw Error("config", "model_mismatch must exceed -1");
  if (noise.pose_std < 0.0 || noise.vel_std < 0.0) throw Error("config", "noise std must be >= 0");
  if (!initial.vec().allFinite()) throw Error("config", "initial state must be finite");
  dyn.scaled(model_mismatch);  // throws when the perturbed plant is invalid
}

State8 inject_noise(const State8& x, const NoiseConfig& noise, std::mt19937_64& rng) {
  if (!noise.enabled) return x;
  std::normal_distribution<double> pose(noise.pose_mean, noise.pose_std);
  std::normal_distribution<double> vel(noise.vel_mean, noise.vel_std);
  Vec8 v = x.vec();
  for (int i = 0; i < 4; ++i) v(i) += pose(rng);
  for (int i = 4; i < 8; ++i) v(i) += vel(rng);
  v(3) = wrap_angle(v(3));
  return State8::from(v);
}

DmdResult identify_for(const ScenarioConfig& config) {
  return identify_line_model(config.scene, config.rig, config.dyn.scaled(config.model_mismatch),
                             config.extractor, config.excitation);
}

RunLog run_scenario(const ScenarioConfig& config, const std::optional<DmdResult>& model) {
  config.validate();
  const DmdResult predictor = model ? *model : identify_for(config);
  const DynParams plant = config.dyn.scaled(config.model_mismatch);
  NmpcProblem ocp = config.nmpc;
  ocp.dyn = config.dyn;
  const Mat6 Tinv = twist_transform(config.rig).inverse();
  const double r_max = 0.5 * config.rig.image_width;
  const double dt = config.control_period;
  const int steps = static_cast<int>(std::lround(config.duration / dt));
  const int horizon = config.estimator.dropout_horizon;
  VsGains gains = config.gains;
  if (config.mode == ControllerMode::kVsNmpc && config.clamp_altitude_reference &&
      std::isfinite(ocp.x_max(2))) {
    const double ceiling = camera_pose_world(Pose4{0.0, 0.0, ocp.x_max(2), 0.0}, config.rig).z;
    gains.eta_zd = std::min(gains.eta_zd, ceiling);
  }

  std::mt19937_64 rng(config.seed);
  RunLog log;
  log.name = config.name;
  log.mode = config.mode;
  log.seed = config.seed;
  log.records.reserve(static_cast<std::size_t>(steps));

  State8 truth = config.initial;
  LineEstimator est = LineEstimator::make(predictor.A, predictor.B, config.estimator);
  Vec6 prev_cam_twist = Vec6::Zero();
  std::optional<OcpSolution> warm;
  std::optional<BodyVel4> last_valid_cmd;
  int cycles_since_valid = 0;
  bool prev_frame_usable = true;
  bool prev_lost = false;

  for (int k = 0; k < steps; ++k) {
    const auto cycle_start = Clock::now();
    RunRecord rec;
    rec.t = k * dt;
    rec.truth = truth;
    rec.measured = inject_noise(truth, config.noise, rng);

    // Perception.
    auto t0 = Clock::now();
    const Pose4 cam = camera_pose_world(truth.pose, config.rig);
    const EdgeImage image = render_edge_mask(config.scene, cam, config.rig);
    std::optional<std::array<LineFeature, 2>> hint;
    if (est.initialized) hint = est.lines();
    const EdgeObservation obs = extract_edge_lines(image, config.rig, config.extractor, hint);
    est = kalman_step(est, obs, prev_cam_twist);
    const Midline mid =
        midline_features(est, config.rig, &image, gains.eta_zd, config.midline);
    rec.timing.perception_ms = ms_since(t0);
    rec.left_valid = obs.left_valid;
    rec.right_valid = obs.right_valid;
    rec.missed_frames = est.missed_frames;
    rec.d_l1l2 = mid.d_l1l2;

    const bool usable = obs.any_valid();
    if (!usable && prev_frame_usable) ++log.dropout_events;
    prev_frame_usable = usable;
    const bool lost = est.feature_lost() || !est.initialized;
    if (lost && !prev_lost && est.feature_lost()) ++log.feature_loss_events;
    prev_lost = lost;

    // Visual servoing.
    t0 = Clock::now();
    const double eta_z = camera_pose_world(rec.measured.pose, config.rig).z;
    bool have_cmd = false;
    BodyVel4 nu_c;
    if (mid.valid && !lost) {
      try {
        const Mat26 J = compact_jacobian(mid.line, mid.z1, mid.z2, config.rig);
        rec.xi = mid.line;
        rec.xi_err = feature_error(config.gains.xi_d, mid.line, r_max);
        const Vec6 nu_d = desired_velocities(rec.xi_err, gains, eta_z);
        rec.v_xd = nu_d(0);
        const VsCommand cmd =
            control_law(J, rec.xi_err, gains.xi_d_rate, nu_d, gains);
        rec.nu_c = cmd.nu_c6;
        nu_c = cmd.nu_c4;
        have_cmd = nu_c.vec().allFinite();
      } catch (const Error&) {
        have_cmd = false;
      }
    }
    const double v_zd =
        gains.eta_zd_rate + gains.k2 * std::tanh(gains.eta_zd - eta_z);
    rec.feature_valid = have_cmd;
    if (have_cmd) {
      last_valid_cmd = nu_c;
      cycles_since_valid = 0;
    } else {
      ++cycles_since_valid;
      if (config.mode == ControllerMode::kVsOnly) {
        nu_c = hold_command(v_zd);
        if (est.feature_lost()) log.failed = true;
      } else if (last_valid_cmd && cycles_since_valid <= horizon) {
        nu_c = *last_valid_cmd;
      } else {
        nu_c = hold_command(v_zd);
      }
      rec.nu_c = nu_c.twist();
    }
    rec.timing.vs_ms = ms_since(t0);

    // Dynamic compensation.
    t0 = Clock::now();
    BodyVel4 applied = nu_c;
    if (config.mode == ControllerMode::kVsNmpc) {
      const OcpSolution shifted = warm ? shift_warm_start(*warm) : OcpSolution{};
      const BodyVel4 traj[1] = {nu_c};
      const OcpSolution sol = solve_rti(ocp, rec.measured, traj, warm ? &shifted : nullptr);
      rec.nmpc_status = static_cast<int>(sol.status);
      rec.nmpc_kkt = sol.kkt_residual;
      rec.nmpc_iterations = sol.iterations;
      rec.qp_iterations = sol.qp_iterations;
      if (!sol.ok()) ++log.qp_failures;
      applied = sol.u1;
      warm = sol;
    }
    rec.timing.nmpc_ms = ms_since(t0);
    rec.nu_ref = applied;

    const double h = dt / config.plant_substeps;
    for (int s = 0; s < config.plant_substeps; ++s) truth = rk4_step(truth, applied, h, plant);
    prev_cam_twist = Tinv * rec.measured.vel.twist();
    rec.timing.cycle_ms = ms_since(cycle_start);
    log.records.push_back(rec);
  }
  return log;
}

RunSummary summarize(const RunLog& log, const NmpcProblem& bounds, double window) {
  RunSummary s;
  const auto& R = log.records;
  if (R.empty()) return s;
  const double t_end = R.back().t;
  int n_win = 0;
  double n_all = 0.0;
  s.max_z = -std::numeric_limits<double>::infinity();
  for (const RunRecord& r : R) {
    s.max_z = std::max(s.max_z, r.truth.pose.z);
    s.mean_residual_wxy += std::abs(r.nu_c(3)) + std::abs(r.nu_c(4));
    s.mean_cycle_ms += r.timing.cycle_ms;
    s.mean_perception_ms += r.timing.perception_ms;
    s.mean_vs_ms += r.timing.vs_ms;
    s.mean_nmpc_ms += r.timing.nmpc_ms;
    n_all += 1.0;
    const Vec4 u = r.nu_ref.vec();
    for (int i = 0; i < 4; ++i) {
      s.max_u_violation = std::max({s.max_u_violation, u(i) - bounds.u_max(i), bounds.u_min(i) - u(i)});
    }
    if (r.t > t_end - window) {
      ++n_win;
      const double ar = std::abs(r.xi_err(0)), at = std::abs(r.xi_err(1));
      s.final_abs_r += ar;
      s.final_abs_theta += at;
      s.max_abs_r_steady = std::max(s.max_abs_r_steady, ar);
      s.max_abs_theta_steady = std::max(s.max_abs_theta_steady, at);
      s.mean_vx_steady += r.truth.vel.vx;
      s.mean_vxd_steady += r.v_xd;
    }
  }
  s.mean_residual_wxy /= n_all;
  s.mean_cycle_ms /= n_all;
  s.mean_perception_ms /= n_all;
  s.mean_vs_ms /= n_all;
  s.mean_nmpc_ms /= n_all;
  if (n_win > 0) {
    s.final_abs_r /= n_win;
    s.final_abs_theta /= n_win;
    s.mean_vx_steady /= n_win;
    s.mean_vxd_steady /= n_win;
  }

  // Convergence: first time after which |err| stays below 5% of its first
  // valid value.
  s.convergence_time = std::numeric_limits<double>::infinity();
  double e0 = -1.0;
  for (const RunRecord& r : R) {
    if (r.feature_valid) {
      e0 = r.xi_err.norm();
      break;
    }
  }
  if (e0 > 0.0) {
    const double thr = 0.05 * e0;
    double candidate = std::numeric_limits<double>::infinity();
    for (const RunRecord& r : R) {
      const bool below = r.feature_valid && r.xi_err.norm() < thr;
      if (!below) {
        candidate = std::numeric_limits<double>::infinity();
      } else if (!std::isfinite(candidate)) {
        candidate = r.t;
      }
    }
    s.convergence_time = candidate;
  }
  return s;
}

std::vector<WindowStats> batch_window_stats(const std::vector<RunLog>& logs, double window) {
  std::vector<WindowStats> out;
  if (logs.empty() || !(window > 0.0)) return out;
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const RunLog& l : logs) len = std::min(len, l.records.size());
  if (len == 0) return out;
  const double dt = len > 1 ? logs[0].records[1].t - logs[0].records[0].t : 1.0;
  const auto per_window = static_cast<std::size_t>(std::lround(window / dt));
  if (per_window == 0) return out;
  const double n = static_cast<double>(logs.size());
  for (std::size_t start = 0; start + per_window <= len; start += per_window) {
    std::vector<double> ar, at;
    for (const RunLog& l : logs) {
      double sr = 0.0, st = 0.0;
      for (std::size_t i = start; i < start + per_window; ++i) {
        sr += std::abs(l.records[i].xi_err(0));
        st += std::abs(l.records[i].xi_err(1));
      }
      ar.push_back(sr / per_window);
      at.push_back(st / per_window);
    }
    WindowStats w;
    w.t_end = logs[0].records[start + per_window - 1].t;
    for (std::size_t i = 0; i < ar.size(); ++i) {
      w.mean_r += ar[i] / n;
      w.mean_theta += at[i] / n;
    }
    if (logs.size() > 1) {
      for (std::size_t i = 0; i < ar.size(); ++i) {
        w.var_r += (ar[i] - w.mean_r) * (ar[i] - w.mean_r) / (n - 1.0);
        w.var_theta += (at[i] - w.mean_theta) * (at[i] - w.mean_theta) / (n - 1.0);
      }
    }
    out.push_back(w);
  }
  return out;
}

}  // namespace pvvs
