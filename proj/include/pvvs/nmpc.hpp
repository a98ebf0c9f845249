#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pvvs/plant.hpp"
#include "pvvs/qp.hpp"
#include "pvvs/types.hpp"

namespace pvvs {

using Mat48 = Eigen::Matrix<double, 4, 8>;

/// Velocity-tracking optimal control problem over N nodes x_1..x_N with
/// controls u_1..u_{N-1}; x_1 is pinned to the measured state.
struct NmpcProblem {
  int N = 10;
  double dt = 0.05;
  Mat4 Q = Mat4::Identity();
  Mat4 R = 1.4 * Mat4::Identity();
  Vec8 x_min;
  Vec8 x_max;
  Vec4 u_min{-2.0, -2.0, -2.0, -1.5};
  Vec4 u_max{2.0, 2.0, 2.0, 1.5};
  DynParams dyn;
  Mat48 C_v;
  /// Penalize u - C(nu_c) nu_c instead of u, so that steady tracking of
  /// nu_c costs nothing.
  bool steady_state_reference = true;
  /// SQP iterations per call; 1 is the real-time iteration.
  int max_iterations = 1;
  double kkt_tol = 1e-6;

  NmpcProblem();
  /// Throws Error("config") on N < 2, dt <= 0, indefinite Q/R or crossed bounds.
  void validate() const;
};

enum class OcpStatus { kConverged, kIterationLimit, kQpInfeasible, kQpFailure };

std::string_view to_string(OcpStatus s);

struct OcpSolution {
  std::vector<Vec8> x;  // N nodes
  std::vector<Vec4> u;  // N - 1 controls
  BodyVel4 u1;          // control to apply now
  double cost = 0.0;
  double kkt_residual = 0.0;       // at the last linearization
  double dynamics_residual = 0.0;  // max |x_{k+1} - RK4(x_k, u_k)| of the returned trajectory
  int iterations = 0;
  int qp_iterations = 0;
  int active_constraints = 0;
  bool x0_clamped = false;
  OcpStatus status = OcpStatus::kIterationLimit;
  /// Nonnegative multipliers of the state bounds per node (node 1 is fixed
  /// and carries zeros).
  std::vector<Vec8> lower_multipliers;
  std::vector<Vec8> upper_multipliers;

  bool ok() const { return status == OcpStatus::kConverged || status == OcpStatus::kIterationLimit; }
};

/// |nu_c - C_v x|^2_Q + |u - u_ref|^2_R.
double stage_cost(const State8& x, const BodyVel4& nu_c, const BodyVel4& u, const Mat4& Q,
                  const Mat4& R, const BodyVel4& u_ref = {});
double terminal_cost(const State8& x, const BodyVel4& nu_c, const Mat4& Q);

/// C(nu_c) nu_c, the input holding nu_c at steady state.
Vec4 steady_state_input(const NmpcProblem& problem, const BodyVel4& nu_c);

/// Full objective of a trajectory; nu_c_traj is held at its last entry.
double trajectory_cost(const NmpcProblem& problem, const std::vector<Vec8>& x,
                       const std::vector<Vec4>& u, std::span<const BodyVel4> nu_c_traj);

/// Condensed Gauss-Newton subproblem in the control increments around
/// `guess`. Its gradient is the exact derivative of trajectory_cost when
/// the guess has no shooting gaps.
QpProblem build_sqp_subproblem(const NmpcProblem& problem, const OcpSolution& guess,
                               std::span<const BodyVel4> nu_c_traj);

/// Trajectory guess with every node at x0 and zero controls.
OcpSolution cold_start(const NmpcProblem& problem, const State8& x0);

/// SQP iterations on the multiple-shooting problem. After each step the
/// states are re-simulated from the updated controls, so every returned
/// trajectory is dynamically consistent; state bounds act on the linearized
/// prediction. Returns the previous guess with a failure status when a
/// subproblem is infeasible.
/// Throws Error("non-finite") on non-finite inputs.
OcpSolution solve_rti(const NmpcProblem& problem, const State8& x0,
                      std::span<const BodyVel4> nu_c_traj,
                      const OcpSolution* warm = nullptr);

/// Shifts trajectories by one stage, repeating the last node and control.
OcpSolution shift_warm_start(const OcpSolution& prev);

}  // namespace pvvs
