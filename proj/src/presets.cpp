#include <array>

#include "pvvs/harness.hpp"

namespace pvvs {

namespace {

ScenarioConfig base(const std::string& name, ControllerMode mode, double lateral, double yaw,
                    double duration) {
  ScenarioConfig c;
  c.name = name;
  c.mode = mode;
  c.duration = duration;
  c.initial.pose = {5.0, lateral, 3.0, yaw};
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"w-selection-bad", "w-selection-good", "vs-vs-nmpc", "tuned", "batch8"};
}

std::vector<ScenarioConfig> experiment_presets(const std::string& name) {
  if (name == "w-selection-bad" || name == "w-selection-good") {
    ScenarioConfig c = base(name, ControllerMode::kVsOnly, 0.5, 0.1, 60.0);
    c.gains.v_x_max = 1.0;
    c.gains.eta_zd = 3.0;
    if (name == "w-selection-bad") c.gains.W = Mat6::Identity();
    return {c};
  }
  if (name == "vs-vs-nmpc") {
    ScenarioConfig c = base(name, ControllerMode::kVsNmpc, 0.3, 0.05, 40.0);
    c.gains.v_x_max = 1.0;
    c.gains.eta_zd = 5.0;
    return {c};
  }
  if (name == "tuned") {
    ScenarioConfig c = base(name, ControllerMode::kVsNmpc, 0.5, 0.05, 40.0);
    c.gains.K = Vec2(300.0, 0.8).asDiagonal();
    c.gains.v_x_max = 0.5;
    c.gains.eta_zd = 3.0;
    c.model_mismatch = 0.1;
    return {c};
  }
  if (name == "batch8") {
    const std::array<double, 8> offsets{0.3, -0.3, 0.6, -0.6, 0.9, -0.9, 1.2, -1.2};
    std::vector<ScenarioConfig> out;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      ScenarioConfig c = experiment_presets("tuned").front();
      c.name = "batch8-" + std::to_string(i + 1);
      c.initial.pose.y = offsets[i];
      c.initial.pose.psi = 0.0;
      c.seed = 101 + i;
      out.push_back(c);
    }
    return out;
  }
  throw Error("unknown-preset", "no preset named '" + name + "'");
}

}  // namespace pvvs
