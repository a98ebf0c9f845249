#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pvvs/plant.hpp"

using namespace pvvs;

TEST_CASE("camera pose in world") {
  CameraRig rig;
  const Pose4 a = camera_pose_world({0, 0, 3, 0}, rig);
  CHECK(a.x == doctest::Approx(0.1));
  CHECK(a.y == doctest::Approx(0.0));
  CHECK(a.z == doctest::Approx(2.95));
  CHECK(a.psi == 0.0);

  rig.t_bc = Vec3(0.1, 0.0, 0.0);
  const Pose4 b = camera_pose_world({1, 2, 3, kPi / 2}, rig);
  CHECK(b.x == doctest::Approx(1.0));
  CHECK(b.y == doctest::Approx(2.1));
  CHECK(b.z == doctest::Approx(3.0));
  CHECK(b.psi == doctest::Approx(kPi / 2));

  rig.t_bc.setZero();
  const Pose4 c = camera_pose_world({0, 0, 0, 0}, rig);
  CHECK(c.vec().norm() == 0.0);
}

TEST_CASE("body jacobian") {
  CHECK((body_jacobian(0.0) - Mat4::Identity()).norm() == 0.0);
  const Vec4 rate = body_jacobian(kPi / 2) * Vec4(1, 0, 0, 0);
  CHECK((rate - Vec4(0, 1, 0, 0)).norm() < 1e-15);
  const Mat4 J = body_jacobian(0.7);
  CHECK((J * J.transpose() - Mat4::Identity()).norm() < 1e-15);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Mat4 Ji = body_jacobian(test::uniform(rng, -10.0, 10.0));
    CHECK((Ji.transpose() * Ji - Mat4::Identity()).norm() < 1e-12);
    CHECK(Ji.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("dynamics accel") {
  const DynParams p;
  CHECK(dynamics_accel(Vec4::Zero(), Vec4::Zero(), p).norm() == 0.0);

  const Vec4 a = dynamics_accel(Vec4::Zero(), Vec4(1, 0, 0, 0), p);
  CHECK((p.mass() * a - Vec4(1, 0, 0, 0)).cwiseAbs().maxCoeff() < 1e-12);

  const Vec4 nu(0.4, -0.2, 0.1, 0.3);
  const Vec4 ref = p.coriolis(nu) * nu;
  CHECK(dynamics_accel(nu, ref, p).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    Vec4 v, r;
    for (int k = 0; k < 4; ++k) {
      v(k) = test::uniform(rng, -2, 2);
      r(k) = test::uniform(rng, -2, 2);
    }
    const Vec4 acc = dynamics_accel(v, r, p);
    CHECK((p.mass() * acc + p.coriolis(v) * v - r).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dynamics parameters") {
  const DynParams p;
  CHECK((p.mass() - p.mass().transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat4>(p.mass()).eigenvalues().minCoeff() > 0.0);
  // Unit DC gain at low speed.
  CHECK((p.coriolis(Vec4::Zero()) - Mat4::Identity()).norm() == 0.0);

  DynParams::Array bad = p.pi();
  bad[0] = -1.0;
  CHECK_THROWS_AS(DynParams{bad}, Error);
  try {
    DynParams{bad};
  } catch (const Error& e) {
    CHECK(e.kind() == "singular-M");
  }

  const DynParams q = p.scaled(0.1);
  for (int i = 0; i < DynParams::kCount; ++i) {
    CHECK(q.pi()[i] == doctest::Approx(1.1 * p.pi()[i]));
  }

  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    Vec4 nu;
    for (int k = 0; k < 4; ++k) nu(k) = test::uniform(rng, -2, 2);
    auto f = [&](const Vec4& v) -> Vec4 { return p.coriolis_times(v); };
    const Eigen::MatrixXd fd = test::numeric_jacobian(f, nu);
    CHECK(test::rel_err(p.coriolis_times_jacobian(nu), fd) < 1e-7);
  }
}

TEST_CASE("state derivative") {
  const DynParams p;
  CHECK(state_derivative(Vec8::Zero(), Vec4::Zero(), p).norm() == 0.0);

  Vec8 x = Vec8::Zero();
  x(4) = 1.0;
  const Vec4 u = p.coriolis_times(x.tail<4>());
  Vec8 expect = Vec8::Zero();
  expect(0) = 1.0;
  CHECK((state_derivative(x, u, p) - expect).norm() < 1e-15);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    Vec8 xi;
    for (int k = 0; k < 8; ++k) xi(k) = test::uniform(rng, -2, 2);
    Vec4 ui(test::uniform(rng, -2, 2), test::uniform(rng, -2, 2), test::uniform(rng, -2, 2),
            test::uniform(rng, -1.5, 1.5));
    const Vec8 f = state_derivative(xi, ui, p);
    CHECK((f.head<4>() - body_jacobian(xi(3)) * xi.tail<4>()).norm() < 1e-15);
    CHECK((f.tail<4>() - dynamics_accel(xi.tail<4>(), ui, p)).norm() < 1e-15);
  }
}

TEST_CASE("rk4 step") {
  const DynParams p;
  State8 eq;
  eq.pose = {1.0, 2.0, 3.0, 0.4};
  const BodyVel4 zero{};
  const State8 same = rk4_step(eq, zero, 0.05, p);
  CHECK((same.vec() - eq.vec()).norm() == 0.0);

  using V1 = Eigen::Matrix<double, 1, 1>;
  const V1 one = V1::Constant(1.0);
  const V1 next = rk4([](const V1& y) -> V1 { return -y; }, one, 0.05);
  const double h = 0.05;
  CHECK(std::abs(next(0) - (1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24)) < 1e-15);
  CHECK(std::abs(next(0) - std::exp(-h)) < h * h * h * h * h / 100);

  State8 wrap;
  wrap.pose.psi = kPi - 0.01;
  wrap.vel.wz = 1.0;
  const State8 w = rk4_step(wrap, {0, 0, 0, 1.0}, 0.1, p);
  CHECK(w.pose.psi <= kPi);
  CHECK(w.pose.psi > -kPi);
  CHECK(w.pose.psi < 0.0);
}

TEST_CASE("rk4 convergence order") {
  // x' = A x with A a damped rotation; exact solution by matrix exponential.
  Mat2 A;
  A << -0.3, 1.0, -1.0, -0.3;
  const Vec2 x0(1.0, 0.5);
  const double T = 2.0;
  const double c = std::cos(T), s = std::sin(T), e = std::exp(-0.3 * T);
  const Vec2 exact = e * Vec2(c * x0(0) + s * x0(1), -s * x0(0) + c * x0(1));
  auto integrate = [&](int n) {
    Vec2 x = x0;
    const double dt = T / n;
    for (int k = 0; k < n; ++k) x = rk4([&](const Vec2& y) -> Vec2 { return A * y; }, x, dt);
    return (x - exact).norm();
  };
  for (int n : {20, 40, 80}) {
    const double order = std::log2(integrate(n) / integrate(2 * n));
    CHECK(order > 3.7);
    CHECK(order < 4.3);
  }
}

TEST_CASE("rk4 matches state derivative for small steps") {
  const DynParams p;
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    Vec8 x;
    for (int k = 0; k < 8; ++k) x(k) = test::uniform(rng, -1.5, 1.5);
    const Vec4 u(test::uniform(rng, -2, 2), test::uniform(rng, -2, 2), test::uniform(rng, -2, 2),
                 test::uniform(rng, -1.5, 1.5));
    auto f = [&](const Vec8& y) -> Vec8 { return state_derivative(y, u, p); };
    const double h = 1e-5;
    const Vec8 fd = (rk4(f, x, h) - rk4(f, x, -h)) / (2 * h);
    const Vec8 exact = f(x);
    CHECK((fd - exact).norm() / exact.norm() < 1e-6);

    const State8 stepped = rk4_step(State8::from(x), BodyVel4::from(u), h, p);
    Vec8 d = stepped.vec() - x;
    d(3) = wrap_angle(d(3));
    CHECK((d / h - exact).norm() / exact.norm() < 1e-4);
  }
}

TEST_CASE("rk4 linearization sensitivities") {
  const DynParams p;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 30; ++i) {
    Vec8 x;
    for (int k = 0; k < 8; ++k) x(k) = test::uniform(rng, -1.5, 1.5);
    Vec4 u;
    for (int k = 0; k < 4; ++k) u(k) = test::uniform(rng, -1.5, 1.5);
    const Rk4Linearization lin = rk4_linearize(x, u, 0.05, p);
    auto step_x = [&](const Vec8& y) -> Vec8 { return rk4_linearize(y, u, 0.05, p).next; };
    auto step_u = [&](const Vec4& v) -> Vec8 { return rk4_linearize(x, v, 0.05, p).next; };
    CHECK((lin.next - rk4([&](const Vec8& y) -> Vec8 { return state_derivative(y, u, p); }, x,
                          0.05))
              .norm() < 1e-14);
    CHECK(test::rel_err(lin.A, test::numeric_jacobian(step_x, x)) < 1e-7);
    CHECK(test::rel_err(lin.B, test::numeric_jacobian(step_u, u)) < 1e-7);
  }
}

TEST_CASE("velocity settles where C(nu) nu equals the input") {
  const DynParams p;
  State8 x;
  x.pose.z = 3.0;
  const BodyVel4 u{0.8, -0.3, 0.2, 0.25};
  for (int k = 0; k < 4000; ++k) x = rk4_step(x, u, 0.01, p);
  const Vec4 nu = x.vel.vec();
  CHECK((p.coriolis_times(nu) - u.vec()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("camera rig validation") {
  CameraRig rig;
  CHECK_NOTHROW(rig.validate());
  rig.R_bc(0, 0) = 2.0;
  CHECK_THROWS_AS(rig.validate(), Error);
  CameraRig r2;
  r2.lambda = 0.0;
  CHECK_THROWS_AS(r2.validate(), Error);
  CameraRig r3;
  r3.R_bc = Vec3(1.0, 1.0, -1.0).asDiagonal();  // reflection
  CHECK_THROWS_AS(r3.validate(), Error);
}
