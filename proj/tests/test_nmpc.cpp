#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pvvs/nmpc.hpp"

using namespace pvvs;

namespace {

std::vector<Vec8> rollout(const NmpcProblem& p, const Vec8& x0, const std::vector<Vec4>& u) {
  std::vector<Vec8> x{x0};
  for (const Vec4& uk : u) {
    x.push_back(rk4([&](const Vec8& y) -> Vec8 { return state_derivative(y, uk, p.dyn); },
                    x.back(), p.dt));
  }
  return x;
}

NmpcProblem converging(int iterations = 30) {
  NmpcProblem p;
  p.max_iterations = iterations;
  p.kkt_tol = 1e-9;
  return p;
}

State8 moving_state() {
  State8 x;
  x.pose = {2.0, -0.5, 3.0, 0.3};
  x.vel = {0.4, 0.2, -0.1, 0.05};
  return x;
}

double max_violation(const NmpcProblem& p, const OcpSolution& s) {
  double v = 0.0;
  for (const Vec4& u : s.u) {
    v = std::max({v, (u - p.u_max).maxCoeff(), (p.u_min - u).maxCoeff()});
  }
  for (const Vec8& x : s.x) {
    for (int i = 0; i < 8; ++i) {
      if (i == 3) continue;
      if (std::isfinite(p.x_max(i))) v = std::max(v, x(i) - p.x_max(i));
      if (std::isfinite(p.x_min(i))) v = std::max(v, p.x_min(i) - x(i));
    }
  }
  return v;
}

}  // namespace

TEST_CASE("problem defaults and validation") {
  NmpcProblem p;
  CHECK(p.N == 10);
  CHECK(p.dt == 0.05);
  CHECK(p.R(0, 0) == doctest::Approx(1.4));
  CHECK(p.x_max(2) == 4.5);
  CHECK(p.x_min(2) == 0.0);
  CHECK(p.x_max(7) == 1.5);
  CHECK(p.u_max(3) == 1.5);
  CHECK(std::isinf(p.x_max(0)));
  CHECK((p.C_v * (Vec8() << 1, 2, 3, 4, 5, 6, 7, 8).finished() - Vec4(5, 6, 7, 8)).norm() == 0.0);
  CHECK_NOTHROW(p.validate());
  NmpcProblem bad = p;
  bad.N = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.R(1, 1) = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.x_min(2) = 5.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("stage cost examples") {
  const Mat4 Q = Mat4::Identity(), R = 1.4 * Mat4::Identity();
  State8 x;
  x.vel = {0.3, 0.1, 0, 0.2};
  CHECK(stage_cost(x, x.vel, {}, Q, R) == 0.0);
  CHECK(stage_cost(State8{}, {1, 0, 0, 0}, {}, Q, R) == doctest::Approx(1.0));
  CHECK(stage_cost(x, x.vel, {1, 0, 0, 0}, Q, R) == doctest::Approx(1.4));
  CHECK(stage_cost(x, x.vel, {1, 0, 0, 0}, Q, R, {1, 0, 0, 0}) == 0.0);
  CHECK(terminal_cost(State8{}, {0, 2, 0, 0}, Q) == doctest::Approx(4.0));

  NmpcProblem p;
  const BodyVel4 c{0.5, -0.2, 0.1, 0.3};
  CHECK((steady_state_input(p, c) - p.dyn.coriolis(c.vec()) * c.vec()).norm() < 1e-15);
}

TEST_CASE("equilibrium tracking") {
  NmpcProblem p = converging(5);
  p.kkt_tol = 1e-6;
  const BodyVel4 c{0.5, 0.1, 0.05, 0.1};
  State8 x0;
  x0.pose = {1, 0, 3, 0.2};
  x0.vel = c;
  const BodyVel4 traj[1] = {c};
  const OcpSolution s = solve_rti(p, x0, traj);
  CHECK(s.status == OcpStatus::kConverged);
  CHECK(s.iterations <= 5);
  CHECK(s.kkt_residual < 1e-6);
  CHECK((s.u1.vec() - steady_state_input(p, c)).cwiseAbs().maxCoeff() < 1e-6);
  for (const Vec8& x : s.x) CHECK((x.tail<4>() - c.vec()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s.cost < 1e-10);
}

TEST_CASE("zero command at rest") {
  const NmpcProblem p = converging();
  State8 x0;
  x0.pose.z = 3.0;
  const BodyVel4 traj[1] = {{}};
  const OcpSolution s = solve_rti(p, x0, traj);
  CHECK(s.ok());
  CHECK(s.u1.vec().norm() < 1e-12);
  CHECK(s.cost < 1e-20);
}

TEST_CASE("converged solution is dynamically feasible and within bounds") {
  const NmpcProblem p = converging();
  const BodyVel4 traj[1] = {{1.8, -1.5, 0.6, 1.2}};
  const OcpSolution s = solve_rti(p, moving_state(), traj);
  CHECK(s.status == OcpStatus::kConverged);
  CHECK(s.dynamics_residual < 1e-8);
  CHECK(max_violation(p, s) < 1e-8);
  CHECK(s.x.size() == 10);
  CHECK(s.u.size() == 9);
  CHECK((s.u1.vec() - s.u[0]).norm() == 0.0);
  CHECK((s.x[0] - moving_state().vec()).norm() == 0.0);
  const std::vector<Vec8> roll = rollout(p, s.x[0], s.u);
  for (std::size_t k = 0; k < roll.size(); ++k) CHECK((roll[k] - s.x[k]).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(s.active_constraints > 0);
}

TEST_CASE("real-time iteration reports its linearization residual") {
  NmpcProblem p;
  const BodyVel4 traj[1] = {{1.0, 0.5, 0.2, 0.3}};
  const OcpSolution s = solve_rti(p, moving_state(), traj);
  CHECK(s.iterations == 1);
  CHECK(s.status == OcpStatus::kIterationLimit);
  CHECK(s.ok());
  CHECK(std::isfinite(s.dynamics_residual));
  CHECK(max_violation(p, s) < 1e-8);
  for (const Vec4& u : s.u) {
    CHECK((u - p.u_max).maxCoeff() <= 0.0);
    CHECK((p.u_min - u).maxCoeff() <= 0.0);
  }
}

TEST_CASE("repeated iterations do not increase the cost") {
  NmpcProblem p;
  const BodyVel4 traj[1] = {{1.2, -0.6, 0.4, 0.5}};
  const State8 x0 = moving_state();
  OcpSolution s = solve_rti(p, x0, traj);
  double prev = s.cost;
  for (int it = 0; it < 15; ++it) {
    s = solve_rti(p, x0, traj, &s);
    CHECK(s.cost <= prev + 1e-10);
    CHECK(s.dynamics_residual < 1e-12);
    prev = s.cost;
  }
  CHECK(s.kkt_residual < 1e-8);
}

TEST_CASE("subproblem gradient matches the nonlinear cost") {
  NmpcProblem p;
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    OcpSolution guess = cold_start(p, moving_state());
    for (Vec4& u : guess.u) {
      for (int i = 0; i < 4; ++i) u(i) = test::uniform(rng, -1.0, 1.0);
    }
    guess.x = rollout(p, guess.x[0], guess.u);
    const BodyVel4 traj[1] = {{test::uniform(rng, -1, 1), test::uniform(rng, -1, 1),
                               test::uniform(rng, -1, 1), test::uniform(rng, -1, 1)}};
    const QpProblem qp = build_sqp_subproblem(p, guess, traj);
    REQUIRE(qp.g.size() == 36);

    Eigen::VectorXd fd(36);
    const double h = 1e-6;
    for (int j = 0; j < 36; ++j) {
      std::vector<Vec4> up = guess.u, um = guess.u;
      up[j / 4](j % 4) += h;
      um[j / 4](j % 4) -= h;
      fd(j) = (trajectory_cost(p, rollout(p, guess.x[0], up), up, traj) -
               trajectory_cost(p, rollout(p, guess.x[0], um), um, traj)) /
              (2 * h);
    }
    CHECK((qp.g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-4);
    // Gauss-Newton Hessian is symmetric positive definite.
    CHECK((qp.H - qp.H.transpose()).norm() < 1e-12 * qp.H.norm());
    CHECK(Eigen::LLT<Eigen::MatrixXd>(qp.H).info() == Eigen::Success);
  }
}

TEST_CASE("warm start") {
  OcpSolution s = cold_start(NmpcProblem{}, moving_state());
  for (std::size_t k = 0; k < s.u.size(); ++k) s.u[k] = Vec4::Constant(double(k));
  for (std::size_t k = 0; k < s.x.size(); ++k) s.x[k] = Vec8::Constant(double(k));
  const OcpSolution sh = shift_warm_start(s);
  for (std::size_t k = 0; k + 2 < s.u.size(); ++k) CHECK((sh.u[k] - s.u[k + 1]).norm() == 0.0);
  CHECK((sh.u.back() - s.u.back()).norm() == 0.0);
  CHECK((sh.x.back() - s.x.back()).norm() == 0.0);
  CHECK((sh.x[0] - s.x[1]).norm() == 0.0);

  OcpSolution flat = cold_start(NmpcProblem{}, moving_state());
  const OcpSolution same = shift_warm_start(flat);
  for (std::size_t k = 0; k < flat.x.size(); ++k) CHECK((same.x[k] - flat.x[k]).norm() == 0.0);

  const NmpcProblem p = converging();
  const BodyVel4 traj[1] = {{0.8, 0.3, -0.2, 0.4}};
  const OcpSolution cold = solve_rti(p, moving_state(), traj);
  const OcpSolution warm = solve_rti(p, moving_state(), traj, &cold);
  CHECK(cold.status == OcpStatus::kConverged);
  CHECK(warm.status == OcpStatus::kConverged);
  CHECK(warm.iterations < cold.iterations);
}

TEST_CASE("warm start yaw is kept continuous") {
  NmpcProblem p = converging();
  State8 x0 = moving_state();
  x0.pose.psi = kPi - 0.01;
  const BodyVel4 traj[1] = {{0.5, 0, 0, 0.5}};
  const OcpSolution a = solve_rti(p, x0, traj);
  State8 x1 = x0;
  x1.pose.psi = -kPi + 0.015;
  const OcpSolution b = solve_rti(p, x1, traj, &a);
  CHECK(b.ok());
  CHECK(std::abs(b.x[1](3) - b.x[0](3)) < 0.1);
  CHECK((b.u1.vec() - a.u[1]).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("altitude ceiling") {
  NmpcProblem p = converging(50);
  State8 x0;
  x0.pose = {0, 0, 4.4, 0};
  x0.vel = {0.5, 0, 0.4, 0};
  const BodyVel4 traj[1] = {{0.5, 0, 2.0, 0}};
  const OcpSolution s = solve_rti(p, x0, traj);
  CHECK(s.status == OcpStatus::kConverged);
  double zmax = 0.0, mult = 0.0;
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    zmax = std::max(zmax, s.x[k](2));
    mult = std::max(mult, s.upper_multipliers[k](2));
    CHECK(s.upper_multipliers[k].minCoeff() >= 0.0);
    CHECK(s.lower_multipliers[k].minCoeff() >= 0.0);
  }
  CHECK(zmax <= 4.5 + 1e-6);
  CHECK(std::abs(s.x.back()(2) - 4.5) < 1e-6);
  CHECK(mult > 0.0);

  // Raw multipliers of the pinned rows carry the upper-bound sign.
  const QpProblem qp = build_sqp_subproblem(p, s, traj);
  const QpResult r = qp_solve(qp);
  REQUIRE(r.status == QpStatus::kOptimal);
  bool pinned = false;
  for (Eigen::Index i = 0; i < qp.A.rows(); ++i) {
    if (std::abs(qp.ubA(i) - qp.A.row(i).dot(r.x)) < 1e-9 && r.y_A(i) != 0.0) {
      CHECK(r.y_A(i) < 0.0);
      pinned = true;
    }
  }
  CHECK(pinned);
}

TEST_CASE("initial state outside the bounds is clamped") {
  const NmpcProblem p = converging();
  State8 x0;
  x0.pose = {0, 0, 4.6, 0};
  const BodyVel4 traj[1] = {{0, 0, 0, 0}};
  const OcpSolution s = solve_rti(p, x0, traj);
  CHECK(s.x0_clamped);
  CHECK(s.x[0](2) == 4.5);
  CHECK(s.ok());
}

TEST_CASE("conflicting bounds are reported as infeasible") {
  NmpcProblem p;
  State8 x0;
  x0.pose = {0, 0, 4.5, 0};
  x0.vel = {0, 0, 2.0, 0};
  const BodyVel4 traj[1] = {{0, 0, 2.0, 0}};
  OcpSolution warm = cold_start(p, x0);
  for (Vec4& u : warm.u) u = Vec4(0.1, 0, 0, 0);
  const OcpSolution s = solve_rti(p, x0, traj, &warm);
  CHECK(s.status == OcpStatus::kQpInfeasible);
  CHECK_FALSE(s.ok());
  CHECK((s.u1.vec() - Vec4(0.1, 0, 0, 0)).norm() == 0.0);
}

TEST_CASE("non-finite inputs") {
  const NmpcProblem p;
  State8 x0;
  x0.pose.x = std::nan("");
  const BodyVel4 traj[1] = {{}};
  CHECK_THROWS_AS(solve_rti(p, x0, traj), Error);
  const BodyVel4 bad[1] = {{std::nan(""), 0, 0, 0}};
  CHECK_THROWS_AS(solve_rti(p, State8{}, bad), Error);
}
