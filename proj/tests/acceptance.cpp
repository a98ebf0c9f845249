// Acceptance checks, one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "geometry_oracles.hpp"
#include "oracles.hpp"
#include "pvvs/harness.hpp"

using namespace pvvs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome jacobians() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_point = 0.0, worst_line = 0.0, worst_compact = 0.0;
  for (int i = 0; i < 100; ++i) {
    CameraRig rig;
    rig.t_bc = Vec3(test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3),
                    test::uniform(rng, -0.3, 0.3));
    const auto [p, q] = test::random_line_points(rng, rig.lambda);
    const PointFeature z1 = project_point(p, rig.lambda), z2 = project_point(q, rig.lambda);
    const Mat46 Jf = feature_jacobian(z1, z2, rig.lambda);
    Eigen::MatrixXd fd(4, 6);
    fd << test::fd_point_interaction(p, rig.lambda), test::fd_point_interaction(q, rig.lambda);
    worst_point = std::max(worst_point, test::norm_rel_err(Jf, fd));
    const LineFeature l = line_from_points(z1, z2);
    worst_line = std::max(worst_line, test::norm_rel_err(line_jacobian(l, z1, z2), test::fd_line_jacobian(z1, z2)));
    const Vec3 P1 = rig.R_bc * p + rig.t_bc, P2 = rig.R_bc * q + rig.t_bc;
    worst_compact = std::max(worst_compact, test::norm_rel_err(compact_jacobian(l, z1, z2, rig),
                                                               test::fd_compact_jacobian(P1, P2, rig)));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({worst_point, worst_line, worst_compact});
  return {worst < 1e-5 && secs < 5.0,
          fmt("max rel err J_f %.2e J_l %.2e compact %.2e, %.3f s", worst_point, worst_line, worst_compact, secs)};
}

Outcome polar_form() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int n = 0; n < 1000;) {
    const double u1 = test::uniform(rng, -320, 320), v1 = test::uniform(rng, -240, 240);
    const double u2 = test::uniform(rng, -320, 320), v2 = test::uniform(rng, -240, 240);
    if (std::abs(u2 - u1) < 1e-3 || std::abs(v2 - v1) < 1e-3) continue;
    const LineFeature a = line_from_points({u1, v1, 1}, {u2, v2, 1});
    const LineFeature b = test::slope_form_line(u1, v1, u2, v2);
    worst = std::max({worst, std::abs(a.r - b.r) / std::max(1.0, std::abs(b.r)),
                      std::abs(a.theta - b.theta) / std::max(1.0, std::abs(b.theta))});
    ++n;
  }
  return {worst < 1e-9, fmt("max rel err %.2e over 1000 pairs", worst)};
}

Outcome projector_identities() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Mat26 J;
    for (int k = 0; k < 12; ++k) J.data()[k] = test::uniform(rng, -100, 100);
    const Mat6 W = test::random_spd<6>(rng, 0.5, 60.0);
    const Mat62 P = weighted_pinv(J, W);
    const Mat6 N = Mat6::Identity() - P * J;
    worst = std::max({worst, (J * P - Mat2::Identity()).cwiseAbs().maxCoeff(),
                      (J * N).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff(),
                      (N * N - N).cwiseAbs().maxCoeff()});
  }
  return {worst < 1e-9, fmt("max identity error %.2e over 100 draws", worst)};
}

Outcome rk4_order() {
  Mat2 A;
  A << -0.3, 1.0, -1.0, -0.3;
  const Vec2 x0(1.0, 0.5);
  const double T = 2.0, e = std::exp(-0.3 * T);
  const Vec2 exact = e * Vec2(std::cos(T) * x0(0) + std::sin(T) * x0(1),
                              -std::sin(T) * x0(0) + std::cos(T) * x0(1));
  auto err = [&](int n) {
    Vec2 x = x0;
    for (int k = 0; k < n; ++k) x = rk4([&](const Vec2& y) -> Vec2 { return A * y; }, x, T / n);
    return (x - exact).norm();
  };
  double lo = 10.0, hi = 0.0;
  for (int n : {10, 20, 40, 80}) {
    const double order = std::log2(err(n) / err(2 * n));
    lo = std::min(lo, order);
    hi = std::max(hi, order);
  }
  return {lo >= 3.7 && hi <= 4.3, fmt("observed order in [%.3f, %.3f]", lo, hi)};
}

Outcome nmpc_grid() {
  const auto t0 = std::chrono::steady_clock::now();
  NmpcProblem p;
  p.N = 2;
  p.u_min = Vec4::Constant(-0.3);
  p.u_max = Vec4::Constant(0.3);
  p.max_iterations = 50;
  p.kkt_tol = 1e-12;
  State8 x0;
  x0.pose = {1.0, 0.2, 3.0, 0.4};
  x0.vel = {0.2, -0.1, 0.05, 0.1};
  const BodyVel4 nu{1.5, 0.05, -1.2, -0.08};
  const std::vector<BodyVel4> ref{nu};
  const OcpSolution s = solve_rti(p, x0, ref);
  const double cost = trajectory_cost(p, s.x, s.u, ref);

  const Vec4 u_ss = steady_state_input(p, nu);
  const BodyVel4 u_ref = BodyVel4::from(u_ss);
  double best = std::numeric_limits<double>::infinity();
  Vec4 arg = Vec4::Zero();
  for (int a = -30; a <= 30; ++a) {
    for (int b = -30; b <= 30; ++b) {
      for (int c = -30; c <= 30; ++c) {
        for (int d = -30; d <= 30; ++d) {
          const BodyVel4 u{0.01 * a, 0.01 * b, 0.01 * c, 0.01 * d};
          const State8 x1 = rk4_step(x0, u, p.dt, p.dyn);
          const Vec8 v = x1.vec();
          bool feasible = true;
          for (int i = 0; i < 8 && feasible; ++i) {
            if (i != 3) feasible = v(i) <= p.x_max(i) && v(i) >= p.x_min(i);
          }
          if (!feasible) continue;
          const double j = stage_cost(x0, nu, u, p.Q, p.R, u_ref) + terminal_cost(x1, nu, p.Q);
          if (j < best) {
            best = j;
            arg = u.vec();
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  int active = 0;
  for (int i = 0; i < 4; ++i) active += std::abs(std::abs(s.u[0](i)) - 0.3) < 1e-9;
  return {s.status == OcpStatus::kConverged && std::abs(cost - best) < 1e-3 && active > 0 && secs < 60.0,
          fmt("solver cost %.6f grid %.6f, %d active bounds, %s, %.1f s", cost, best, active,
              std::string(to_string(s.status)).c_str(), secs)};
}

Outcome altitude_constraint() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig c = experiment_presets("vs-vs-nmpc").front();
  const DmdResult model = identify_for(c);
  const RunLog with = run_scenario(c, model);
  const double t_with = seconds_since(t0);
  c.mode = ControllerMode::kVsOnly;
  const auto t1 = std::chrono::steady_clock::now();
  const RunLog without = run_scenario(c, model);
  const double t_without = seconds_since(t1);
  const double z_with = summarize(with, c.nmpc).max_z, z_without = summarize(without, c.nmpc).max_z;
  return {z_with <= 4.55 && z_without > 4.5 && without.dropout_events >= 1 && t_with < 120 && t_without < 120,
          fmt("max z %.3f with NMPC, %.3f vs-only with %d dropout events", z_with, z_without,
              without.dropout_events)};
}

Outcome weight_selection() {
  const ScenarioConfig bad = experiment_presets("w-selection-bad").front();
  const ScenarioConfig good = experiment_presets("w-selection-good").front();
  const DmdResult model = identify_for(good);
  const RunSummary sb = summarize(run_scenario(bad, model), bad.nmpc);
  const RunSummary sg = summarize(run_scenario(good, model), good.nmpc);
  const double ratio = sb.mean_residual_wxy / sg.mean_residual_wxy;
  return {ratio > 10.0 && sb.convergence_time >= 2.0 * sg.convergence_time,
          fmt("|w_x|+|w_y| ratio %.1f, convergence %.2f s vs %.2f s", ratio, sb.convergence_time,
              sg.convergence_time)};
}

Outcome tuned_bounds() {
  const ScenarioConfig c = experiment_presets("tuned").front();
  const RunSummary s = summarize(run_scenario(c), c.nmpc);
  const double vx_err = std::abs(s.mean_vx_steady - s.mean_vxd_steady) / s.mean_vxd_steady;
  return {s.max_abs_r_steady < 0.18 && s.max_abs_theta_steady < 0.05 && vx_err < 0.1,
          fmt("steady max |r| %.2e |theta| %.2e, v_x %.4f vs %.4f", s.max_abs_r_steady,
              s.max_abs_theta_steady, s.mean_vx_steady, s.mean_vxd_steady)};
}

Outcome batch_statistics() {
  const auto configs = experiment_presets("batch8");
  const DmdResult model = identify_for(configs.front());
  std::vector<RunLog> logs;
  bool bounded = true;
  for (const ScenarioConfig& c : configs) {
    logs.push_back(run_scenario(c, model));
    const RunSummary s = summarize(logs.back(), c.nmpc);
    bounded = bounded && s.max_abs_r_steady < 0.18 && s.max_abs_theta_steady < 0.05;
  }
  const auto w = batch_window_stats(logs, 5.0);
  bool monotone = w.size() >= 2;
  std::string seq_r, seq_t;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i > 0) monotone = monotone && w[i].mean_r < w[i - 1].mean_r && w[i].mean_theta < w[i - 1].mean_theta;
    seq_r += fmt(" %.3g", w[i].mean_r);
    seq_t += fmt(" %.3g", w[i].mean_theta);
  }
  return {monotone && bounded,
          std::string(monotone ? "monotone" : "not monotone") + (bounded ? ", bounded" : ", unbounded") +
              "; mean |r|:" + seq_r + "; mean |theta|:" + seq_t};
}

Outcome kalman_dmd() {
  std::mt19937_64 rng(5);
  Mat4 A;
  Mat46 B;
  for (int i = 0; i < 16; ++i) A.data()[i] = test::uniform(rng, -0.5, 0.5);
  for (int i = 0; i < 24; ++i) B.data()[i] = test::uniform(rng, -2, 2);
  std::vector<DmdSnapshot> data;
  for (int k = 0; k < 400; ++k) {
    DmdSnapshot sn;
    for (int i = 0; i < 4; ++i) sn.s(i) = test::uniform(rng, -100, 100);
    for (int i = 0; i < 6; ++i) sn.input(i) = test::uniform(rng, -1, 1);
    sn.next = A * sn.s + B * sn.input;
    data.push_back(sn);
  }
  const DmdResult fit = dmd_fit(data);
  const double dmd_err = std::max((fit.A - A).cwiseAbs().maxCoeff(), (fit.B - B).cwiseAbs().maxCoeff());

  std::mt19937_64 nrng(42);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat4 As;
  As << 0.98, 0.5, 0, 0, 0, 0.97, 0, 0, 0, 0, 0.98, -0.5, 0, 0, 0, 0.97;
  Mat46 Bs = Mat46::Zero();
  Bs(0, 1) = Bs(2, 1) = 4.0;
  Bs(1, 5) = Bs(3, 5) = 0.05;
  const double sr = 2.0, st = 0.01;
  LineEstimatorConfig cfg;
  cfg.Q = 1e-6 * Mat4::Identity();
  cfg.R = Vec4(sr * sr, st * st, sr * sr, st * st).asDiagonal();
  LineEstimator est = LineEstimator::make(As, Bs, cfg);
  Vec4 s(-80, 0.02, 80, -0.01);
  Vec6 tw = Vec6::Zero();
  double er = 0.0, et = 0.0;
  int count = 0;
  for (int k = 0; k < 6000; ++k) {
    EdgeObservation o;
    o.left = {s(0) + sr * n(nrng), s(1) + st * n(nrng)};
    o.right = {s(2) + sr * n(nrng), s(3) + st * n(nrng)};
    o.left_valid = o.right_valid = true;
    est = kalman_step(est, o, tw);
    if (k >= 1000) {
      er += std::pow(est.s(0) - s(0), 2) + std::pow(est.s(2) - s(2), 2);
      et += std::pow(est.s(1) - s(1), 2) + std::pow(est.s(3) - s(3), 2);
      count += 2;
    }
    tw(1) = 0.2 * std::sin(0.01 * k);
    tw(5) = 0.1 * std::cos(0.013 * k);
    s = As * s + Bs * tw;
  }
  const double red_r = 1.0 - er / count / (sr * sr), red_t = 1.0 - et / count / (st * st);
  return {dmd_err < 1e-8 && red_r >= 0.5 && red_t >= 0.5,
          fmt("dmd max err %.2e, variance reduction r %.0f%% theta %.0f%%", dmd_err, 100 * red_r, 100 * red_t)};
}

Outcome timing() {
  const ScenarioConfig c = experiment_presets("tuned").front();
  const RunSummary s = summarize(run_scenario(c), c.nmpc);
  return {s.mean_cycle_ms < 50.0,
          fmt("mean cycle %.3f ms (perception %.3f, vs %.4f, nmpc %.3f)", s.mean_cycle_ms,
              s.mean_perception_ms, s.mean_vs_ms, s.mean_nmpc_ms)};
}

Outcome determinism() {
  bool same = true;
  std::size_t rows = 0;
  for (const std::string& name : {"tuned", "w-selection-good"}) {
    const ScenarioConfig c = experiment_presets(name).front();
    const std::string a = log_to_csv(run_scenario(c)), b = log_to_csv(run_scenario(c));
    same = same && a == b;
    rows += static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  }
  return {same, fmt("%zu CSV lines compared", rows)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pvvs acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"jacobians match finite differences", jacobians},
      {"robust line form equals slope form", polar_form},
      {"pseudoinverse and projector identities", projector_identities},
      {"rk4 convergence order", rk4_order},
      {"nmpc matches grid search", nmpc_grid},
      {"altitude constraint and vs-only dropout", altitude_constraint},
      {"roll/pitch weight selection", weight_selection},
      {"tuned run error bounds", tuned_bounds},
      {"batch window statistics", batch_statistics},
      {"kalman filter and dmd", kalman_dmd},
      {"cycle time", timing},
      {"deterministic logs", determinism}};

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
