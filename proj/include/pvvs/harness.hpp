#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pvvs/nmpc.hpp"
#include "pvvs/perception.hpp"
#include "pvvs/plant.hpp"
#include "pvvs/vs_controller.hpp"

namespace pvvs {

enum class ControllerMode { kVsOnly, kVsNmpc };

std::string_view to_string(ControllerMode m);
/// Accepts "vs", "vs-only", "vs-nmpc" and "vs+nmpc".
ControllerMode parse_mode(std::string_view s);

/// Gaussian sensor noise, (mean, standard deviation) per component.
struct NoiseConfig {
  bool enabled = true;
  double pose_mean = -0.005;
  double pose_std = 0.005;
  double vel_mean = -0.001;
  double vel_std = 0.001;
};

struct ScenarioConfig {
  std::string name = "custom";
  PvScene scene;
  CameraRig rig;
  DynParams dyn;               // controller model
  double model_mismatch = 0.0; // plant uses dyn.scaled(model_mismatch)
  VsGains gains;
  NmpcProblem nmpc;            // nmpc.dyn is replaced by dyn at run time
  ControllerMode mode = ControllerMode::kVsNmpc;
  /// With the NMPC in the loop, cap the altitude reference of the
  /// null-space task at the NMPC altitude ceiling (camera frame).
  bool clamp_altitude_reference = true;
  State8 initial;
  double duration = 40.0;
  double control_period = 0.05;
  int plant_substeps = 5;
  NoiseConfig noise;
  std::uint64_t seed = 1;
  ExtractorConfig extractor;
  LineEstimatorConfig estimator;
  MidlineConfig midline;
  ExcitationConfig excitation;

  /// Throws Error("config") on inconsistent settings.
  void validate() const;
};

/// Adds the configured noise to every pose and velocity component.
/// Yaw is re-wrapped.
State8 inject_noise(const State8& x, const NoiseConfig& noise, std::mt19937_64& rng);

struct StageTiming {
  double perception_ms = 0.0;  // render + extract + filter + midline
  double vs_ms = 0.0;
  double nmpc_ms = 0.0;
  double cycle_ms = 0.0;       // wall clock of the whole cycle
};

struct RunRecord {
  double t = 0.0;
  State8 truth;
  State8 measured;
  LineFeature xi;
  Vec2 xi_err = Vec2::Zero();
  double v_xd = 0.0;       // desired forward speed of the null-space task
  Vec6 nu_c = Vec6::Zero();
  BodyVel4 nu_ref;         // command applied to the vehicle
  bool feature_valid = false;
  bool left_valid = false;
  bool right_valid = false;
  int missed_frames = 0;
  double d_l1l2 = 0.0;
  int nmpc_status = -1;    // OcpStatus, -1 when the NMPC did not run
  double nmpc_kkt = 0.0;
  int nmpc_iterations = 0;
  int qp_iterations = 0;
  StageTiming timing;
};

struct RunLog {
  std::string name;
  ControllerMode mode = ControllerMode::kVsNmpc;
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
  int dropout_events = 0;       // entries into frames with no usable edge
  int feature_loss_events = 0;  // entries into the lost-feature regime
  int qp_failures = 0;
  bool failed = false;          // vs-only run that lost its features
};

/// Closed-loop run. `model` supplies the identified line predictor; when
/// absent it is identified from the configured excitation flight.
RunLog run_scenario(const ScenarioConfig& config, const std::optional<DmdResult>& model = {});

/// Line predictor for a scenario (excitation flight of the plant).
DmdResult identify_for(const ScenarioConfig& config);

/// Named experiment setups: w-selection-bad, w-selection-good, vs-vs-nmpc,
/// tuned (one run each) and batch8 (eight runs). Throws Error("unknown-preset").
std::vector<ScenarioConfig> experiment_presets(const std::string& name);
std::vector<std::string> preset_names();

// Summary metrics.
struct RunSummary {
  double final_abs_r = 0.0;       // mean |r err| over the last window
  double final_abs_theta = 0.0;
  double max_abs_r_steady = 0.0;  // max over the last window
  double max_abs_theta_steady = 0.0;
  double mean_vx_steady = 0.0;
  double mean_vxd_steady = 0.0;
  double max_z = 0.0;
  double mean_residual_wxy = 0.0;  // mean of |w_x| + |w_y| commanded
  double convergence_time = 0.0;   // first time |err| stays below 5% of initial; inf if never
  double mean_cycle_ms = 0.0;
  double mean_perception_ms = 0.0;
  double mean_vs_ms = 0.0;
  double mean_nmpc_ms = 0.0;
  double max_u_violation = 0.0;    // applied command beyond the NMPC input bounds
};

RunSummary summarize(const RunLog& log, const NmpcProblem& bounds, double window = 10.0);

/// Batch statistics per time window: mean (1/n) sum |x_i| and sample variance
/// (1/(n-1)) sum (|x_i| - mean)^2 of the window-averaged errors.
struct WindowStats {
  double t_end = 0.0;
  double mean_r = 0.0, var_r = 0.0;
  double mean_theta = 0.0, var_theta = 0.0;
};
std::vector<WindowStats> batch_window_stats(const std::vector<RunLog>& logs, double window);

// Configuration files.
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const ScenarioConfig& config, const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const std::string& text);

// Log export.
std::string log_csv_header();
std::string log_to_csv(const RunLog& log);
/// Parses a CSV produced by log_to_csv; timing fields are left at zero.
RunLog log_from_csv(const std::string& text);
std::string timing_to_csv(const RunLog& log);
std::string summary_to_json(const RunLog& log, const RunSummary& summary);
std::string batch_to_csv(const std::vector<WindowStats>& stats);
/// SVG line charts of the feature errors, velocities and altitude.
std::string plot_svg(const RunLog& log, const std::string& what);
std::string batch_plot_svg(const std::vector<WindowStats>& stats);

/// Writes run.csv (optional), timing.csv, summary.json and plots (optional)
/// into `dir`, prefixed by `stem`. Throws Error("io") with the failing path.
void export_log(const RunLog& log, const RunSummary& summary, const std::filesystem::path& dir,
                const std::string& stem, bool csv, bool plots);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pvvs
