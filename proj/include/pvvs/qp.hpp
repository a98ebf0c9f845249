#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace pvvs {

/// min 1/2 x'Hx + g'x  s.t.  Aeq x = beq,  lbA <= A x <= ubA,  lb <= x <= ub.
/// Infinite bounds are ignored. Empty matrices mean "no such constraints".
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd A;
  Eigen::VectorXd lbA;
  Eigen::VectorXd ubA;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations, kNotConvex };

std::string_view to_string(QpStatus s);

/// Multipliers follow H x + g = Aeq' y_eq + A' y_A + y_bound, with
/// y >= 0 on active lower bounds and y <= 0 on active upper bounds.
struct QpResult {
  QpStatus status = QpStatus::kOptimal;
  Eigen::VectorXd x;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_A;
  Eigen::VectorXd y_bound;
  int iterations = 0;
  int active_count = 0;
  double objective = 0.0;
};

struct QpOptions {
  int max_iterations = 0;  // 0 selects 10 (n + constraints)
  double feasibility_tol = 1e-11;
};

/// Dual active-set method of Goldfarb and Idnani. H must be positive definite.
QpResult qp_solve(const QpProblem& qp, const QpOptions& options = {});

/// Largest violation among stationarity, primal feasibility, dual sign and
/// complementarity for a candidate solution.
double qp_kkt_residual(const QpProblem& qp, const QpResult& res);

}  // namespace pvvs
