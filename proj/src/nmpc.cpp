#include "pvvs/nmpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pvvs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kYaw = 3;

BodyVel4 command_at(std::span<const BodyVel4> traj, int k) {
  if (traj.empty()) return {};
  return traj[std::min<std::size_t>(static_cast<std::size_t>(k), traj.size() - 1)];
}

Vec4 input_reference(const NmpcProblem& p, std::span<const BodyVel4> traj, int k) {
  return p.steady_state_reference ? steady_state_input(p, command_at(traj, k)) : Vec4::Zero();
}

// State components carrying a finite bound. Yaw is an angle on the circle
// and is not constrained.
std::vector<int> bounded_states(const NmpcProblem& p) {
  std::vector<int> idx;
  for (int i = 0; i < 8; ++i) {
    if (i == kYaw) continue;
    if (std::isfinite(p.x_min(i)) || std::isfinite(p.x_max(i))) idx.push_back(i);
  }
  return idx;
}

struct Condensed {
  QpProblem qp;
  std::vector<Vec8> offset;                // x_bar_k + d_k
  std::vector<Eigen::MatrixXd> G;          // d x_k / d du
  std::vector<std::pair<int, int>> rows;   // (node, component) per state row
  double max_gap = 0.0;
};

Condensed condense(const NmpcProblem& p, const OcpSolution& guess,
                   std::span<const BodyVel4> nu_c) {
  const int N = p.N, nu = 4 * (N - 1);
  Condensed c;
  c.offset.resize(N);
  c.G.assign(N, Eigen::MatrixXd::Zero(8, nu));
  c.offset[0] = guess.x[0];
  Vec8 d = Vec8::Zero();
  for (int k = 0; k + 1 < N; ++k) {
    const Rk4Linearization lin = rk4_linearize(guess.x[k], guess.u[k], p.dt, p.dyn);
    const Vec8 gap = lin.next - guess.x[k + 1];
    c.max_gap = std::max(c.max_gap, gap.cwiseAbs().maxCoeff());
    d = lin.A * d + gap;
    c.offset[k + 1] = guess.x[k + 1] + d;
    c.G[k + 1] = lin.A * c.G[k];
    c.G[k + 1].block(0, 4 * k, 8, 4) += lin.B;
  }

  QpProblem& qp = c.qp;
  qp.H = Eigen::MatrixXd::Zero(nu, nu);
  qp.g = Eigen::VectorXd::Zero(nu);
  const Mat4 Qs = 0.5 * (p.Q + p.Q.transpose());
  const Mat4 Rs = 0.5 * (p.R + p.R.transpose());
  for (int k = 1; k < N; ++k) {
    const Eigen::MatrixXd CG = p.C_v * c.G[k];
    const Vec4 e = command_at(nu_c, k).vec() - p.C_v * c.offset[k];
    qp.H.noalias() += 2.0 * CG.transpose() * Qs * CG;
    qp.g.noalias() -= 2.0 * CG.transpose() * (Qs * e);
  }
  for (int k = 0; k + 1 < N; ++k) {
    qp.H.block(4 * k, 4 * k, 4, 4) += 2.0 * Rs;
    qp.g.segment(4 * k, 4) += 2.0 * Rs * (guess.u[k] - input_reference(p, nu_c, k));
  }

  const std::vector<int> idx = bounded_states(p);
  const int rows = static_cast<int>(idx.size()) * (N - 1);
  qp.A.resize(rows, nu);
  qp.lbA.resize(rows);
  qp.ubA.resize(rows);
  int r = 0;
  for (int k = 1; k < N; ++k) {
    for (int i : idx) {
      qp.A.row(r) = c.G[k].row(i);
      qp.lbA(r) = p.x_min(i) - c.offset[k](i);
      qp.ubA(r) = p.x_max(i) - c.offset[k](i);
      c.rows.emplace_back(k, i);
      ++r;
    }
  }
  qp.lb.resize(nu);
  qp.ub.resize(nu);
  for (int k = 0; k + 1 < N; ++k) {
    qp.lb.segment(4 * k, 4) = p.u_min - guess.u[k];
    qp.ub.segment(4 * k, 4) = p.u_max - guess.u[k];
  }
  return c;
}

double dynamics_gap(const NmpcProblem& p, const OcpSolution& s) {
  double worst = 0.0;
  for (int k = 0; k + 1 < p.N; ++k) {
    const Vec8 next = rk4(
        [&](const Vec8& x) { return state_derivative(x, s.u[k], p.dyn); }, s.x[k], p.dt);
    worst = std::max(worst, (next - s.x[k + 1]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

NmpcProblem::NmpcProblem() {
  x_min << -kInf, -kInf, 0.0, -kPi, -2.0, -2.0, -2.0, -1.5;
  x_max << kInf, kInf, 4.5, kPi, 2.0, 2.0, 2.0, 1.5;
  C_v.setZero();
  C_v.rightCols<4>().setIdentity();
}

void NmpcProblem::validate() const {
  if (N < 2) throw Error("config", "horizon must have at least 2 nodes");
  if (!(dt > 0.0)) throw Error("config", "dt must be positive");
  if (Eigen::LLT<Mat4>(0.5 * (Q + Q.transpose())).info() != Eigen::Success ||
      Eigen::LLT<Mat4>(0.5 * (R + R.transpose())).info() != Eigen::Success) {
    throw Error("config", "Q and R must be positive definite");
  }
  for (int i = 0; i < 8; ++i) {
    if (std::isnan(x_min(i)) || std::isnan(x_max(i)) || !(x_min(i) < x_max(i))) {
      throw Error("config", "state bounds must satisfy x_min < x_max");
    }
  }
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(u_min(i)) || !std::isfinite(u_max(i)) || !(u_min(i) < u_max(i))) {
      throw Error("config", "input bounds must be finite with u_min < u_max");
    }
  }
  if (max_iterations < 1) throw Error("config", "max_iterations must be at least 1");
}

std::string_view to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::kConverged: return "converged";
    case OcpStatus::kIterationLimit: return "iteration-limit";
    case OcpStatus::kQpInfeasible: return "qp-infeasible";
    case OcpStatus::kQpFailure: return "qp-failure";
  }
  return "unknown";
}

double stage_cost(const State8& x, const BodyVel4& nu_c, const BodyVel4& u, const Mat4& Q,
                  const Mat4& R, const BodyVel4& u_ref) {
  const Vec4 du = u.vec() - u_ref.vec();
  return terminal_cost(x, nu_c, Q) + du.dot(R * du);
}

double terminal_cost(const State8& x, const BodyVel4& nu_c, const Mat4& Q) {
  const Vec4 e = nu_c.vec() - x.vel.vec();
  return e.dot(Q * e);
}

Vec4 steady_state_input(const NmpcProblem& problem, const BodyVel4& nu_c) {
  return problem.dyn.coriolis_times(nu_c.vec());
}

double trajectory_cost(const NmpcProblem& problem, const std::vector<Vec8>& x,
                       const std::vector<Vec4>& u, std::span<const BodyVel4> nu_c_traj) {
  double J = 0.0;
  const int N = static_cast<int>(x.size());
  for (int k = 0; k + 1 < N; ++k) {
    J += stage_cost(State8::from(x[k]), command_at(nu_c_traj, k), BodyVel4::from(u[k]),
                    problem.Q, problem.R,
                    BodyVel4::from(input_reference(problem, nu_c_traj, k)));
  }
  if (N > 0) J += terminal_cost(State8::from(x[N - 1]), command_at(nu_c_traj, N - 1), problem.Q);
  return J;
}

QpProblem build_sqp_subproblem(const NmpcProblem& problem, const OcpSolution& guess,
                               std::span<const BodyVel4> nu_c_traj) {
  return condense(problem, guess, nu_c_traj).qp;
}

OcpSolution cold_start(const NmpcProblem& problem, const State8& x0) {
  OcpSolution s;
  s.x.assign(problem.N, x0.vec());
  s.u.assign(problem.N - 1, Vec4::Zero());
  s.lower_multipliers.assign(problem.N, Vec8::Zero());
  s.upper_multipliers.assign(problem.N, Vec8::Zero());
  return s;
}

OcpSolution solve_rti(const NmpcProblem& problem, const State8& x0_in,
                      std::span<const BodyVel4> nu_c_traj, const OcpSolution* warm) {
  problem.validate();
  if (!x0_in.vec().allFinite()) throw Error("non-finite", "initial state is not finite");
  for (const BodyVel4& c : nu_c_traj) {
    if (!c.vec().allFinite()) throw Error("non-finite", "velocity command is not finite");
  }
  const int N = problem.N;

  Vec8 x0 = x0_in.vec();
  bool clamped = false;
  for (int i = 0; i < 8; ++i) {
    if (i == kYaw) continue;
    const double c = std::clamp(x0(i), problem.x_min(i), problem.x_max(i));
    clamped |= c != x0(i);
    x0(i) = c;
  }

  OcpSolution guess;
  if (warm != nullptr && static_cast<int>(warm->x.size()) == N &&
      static_cast<int>(warm->u.size()) == N - 1) {
    guess = *warm;
    // Keep the predicted yaw continuous with the measured one.
    const double turns = std::round((x0(kYaw) - guess.x[0](kYaw)) / (2.0 * kPi));
    for (Vec8& x : guess.x) x(kYaw) += turns * 2.0 * kPi;
  } else {
    guess = cold_start(problem, State8::from(x0));
  }
  guess.x[0] = x0;
  guess.x0_clamped = clamped;
  guess.lower_multipliers.assign(N, Vec8::Zero());
  guess.upper_multipliers.assign(N, Vec8::Zero());
  guess.iterations = 0;
  guess.qp_iterations = 0;

  OcpSolution sol = guess;
  sol.status = OcpStatus::kIterationLimit;
  for (int it = 0; it < problem.max_iterations; ++it) {
    const Condensed c = condense(problem, sol, nu_c_traj);
    const QpResult qr = qp_solve(c.qp);
    sol.qp_iterations += qr.iterations;
    if (qr.status != QpStatus::kOptimal) {
      OcpSolution fail = guess;
      fail.status = qr.status == QpStatus::kInfeasible ? OcpStatus::kQpInfeasible
                                                       : OcpStatus::kQpFailure;
      fail.iterations = it + 1;
      fail.qp_iterations = sol.qp_iterations;
      fail.kkt_residual = kInf;
      fail.u1 = BodyVel4::from(guess.u[0].cwiseMax(problem.u_min).cwiseMin(problem.u_max));
      fail.cost = trajectory_cost(problem, fail.x, fail.u, nu_c_traj);
      fail.dynamics_residual = dynamics_gap(problem, fail);
      return fail;
    }
    const Eigen::VectorXd& du = qr.x;
    for (int k = 0; k + 1 < N; ++k) {
      sol.u[k] += du.segment(4 * k, 4);
      sol.u[k] = sol.u[k].cwiseMax(problem.u_min).cwiseMin(problem.u_max);
    }
    for (int k = 1; k < N; ++k) {
      const Vec4& u = sol.u[k - 1];
      sol.x[k] = rk4([&](const Vec8& y) -> Vec8 { return state_derivative(y, u, problem.dyn); },
                     sol.x[k - 1], problem.dt);
    }
    for (Vec8& m : sol.lower_multipliers) m.setZero();
    for (Vec8& m : sol.upper_multipliers) m.setZero();
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
      const auto [k, i] = c.rows[r];
      const double y = qr.y_A(static_cast<Eigen::Index>(r));
      sol.lower_multipliers[k](i) = std::max(y, 0.0);
      sol.upper_multipliers[k](i) = std::max(-y, 0.0);
    }
    sol.active_constraints = qr.active_count;
    sol.iterations = it + 1;
    sol.kkt_residual = std::max(c.max_gap, (c.qp.H * du).cwiseAbs().maxCoeff());
    if (sol.kkt_residual < problem.kkt_tol) {
      sol.status = OcpStatus::kConverged;
      break;
    }
  }
  sol.u1 = BodyVel4::from(sol.u[0]);
  sol.cost = trajectory_cost(problem, sol.x, sol.u, nu_c_traj);
  sol.dynamics_residual = dynamics_gap(problem, sol);
  return sol;
}

OcpSolution shift_warm_start(const OcpSolution& prev) {
  OcpSolution s = prev;
  if (s.x.size() > 1) {
    std::rotate(s.x.begin(), s.x.begin() + 1, s.x.end());
    s.x.back() = s.x[s.x.size() - 2];
  }
  if (s.u.size() > 1) {
    std::rotate(s.u.begin(), s.u.begin() + 1, s.u.end());
    s.u.back() = s.u[s.u.size() - 2];
  }
  if (!s.u.empty()) s.u1 = BodyVel4::from(s.u.front());
  return s;
}

}  // namespace pvvs
