#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "pvvs/harness.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out = "pvvs_out";
  bool csv = false;
  bool plots = false;
  std::string mode;
  std::optional<double> duration;
};

int run(const RunArgs& a) {
  using namespace pvvs;
  std::vector<ScenarioConfig> configs;
  if (!a.config.empty()) {
    configs.push_back(load_config(a.config));
  } else {
    configs = experiment_presets(a.preset);
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ScenarioConfig& c = configs[i];
    if (a.seed) c.seed = *a.seed + i;
    if (!a.mode.empty()) c.mode = parse_mode(a.mode);
    if (a.duration) c.duration = *a.duration;
    c.validate();
  }

  const DmdResult model = identify_for(configs.front());
  std::printf("line predictor identified, one-step residual rms %.4g\n", model.residual_rms);
  std::vector<RunLog> logs;
  for (const ScenarioConfig& c : configs) {
    RunLog log = run_scenario(c, model);
    const RunSummary s = summarize(log, c.nmpc);
    const std::string stem = c.name + "_" + std::string(to_string(c.mode));
    export_log(log, s, a.out, stem, a.csv, a.plots);
    std::printf("%-16s mode=%-7s seed=%-4llu |r err|=%.4f |theta err|=%.4f max z=%.3f "
                "dropouts=%d lost=%d failed=%s cycle=%.2f ms\n",
                c.name.c_str(), std::string(to_string(c.mode)).c_str(),
                static_cast<unsigned long long>(c.seed), s.final_abs_r, s.final_abs_theta, s.max_z,
                log.dropout_events, log.feature_loss_events, log.failed ? "yes" : "no",
                s.mean_cycle_ms);
    logs.push_back(std::move(log));
  }
  if (logs.size() > 1) {
    const auto stats = batch_window_stats(logs, 5.0);
    write_text(std::filesystem::path(a.out) / "batch_summary.csv", batch_to_csv(stats));
    if (a.plots) write_text(std::filesystem::path(a.out) / "batch_summary.svg", batch_plot_svg(stats));
  }
  std::printf("outputs written to %s\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pvvs: line-following quadrotor simulator"};
  app.require_subcommand(1);

  RunArgs args;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario or preset in closed loop");
  auto* cfg = run_cmd->add_option("--config", args.config, "Scenario JSON file")->check(CLI::ExistingFile);
  auto* pre = run_cmd->add_option("--preset", args.preset, "Experiment preset name");
  cfg->excludes(pre);
  pre->excludes(cfg);
  run_cmd->add_option("--seed", args.seed, "Random seed (batch runs use seed + index)");
  run_cmd->add_option("--out", args.out, "Output directory");
  run_cmd->add_flag("--csv", args.csv, "Write per-cycle CSV logs");
  run_cmd->add_flag("--plots", args.plots, "Write SVG plots");
  run_cmd->add_option("--mode", args.mode, "Controller mode")->check(CLI::IsMember({"vs", "vs-nmpc"}));
  run_cmd->add_option("--duration", args.duration, "Run length in seconds")->check(CLI::PositiveNumber);

  CLI::App* list_cmd = app.add_subcommand("presets", "List experiment presets");
  std::string dump_preset;
  CLI::App* cfg_cmd = app.add_subcommand("config", "Print a preset as a scenario JSON file");
  cfg_cmd->add_option("preset", dump_preset, "Preset name")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) {
      if (args.config.empty() && args.preset.empty()) {
        std::cerr << "run: one of --config or --preset is required\n";
        return 2;
      }
      return run(args);
    }
    if (*list_cmd) {
      for (const std::string& n : pvvs::preset_names()) std::cout << n << "\n";
      return 0;
    }
    if (*cfg_cmd) {
      std::cout << pvvs::config_to_json(pvvs::experiment_presets(dump_preset).front());
      return 0;
    }
  } catch (const pvvs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
