#include "pvvs/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pvvs {

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max-iterations";
    case QpStatus::kNotConvex: return "not-convex";
  }
  return "unknown";
}

namespace {

enum class Source { kEq, kRow, kBound };

// One-sided constraint c'x >= b (or == b for equalities).
struct Constraint {
  Eigen::VectorXd c;
  double b;
  Source source;
  int index;
  int sign;  // +1 lower side, -1 upper side
};

struct Directions {
  Eigen::VectorXd z;  // primal step direction
  Eigen::VectorXd r;  // change of the active multipliers
  bool degenerate;    // c is in the span of the active normals
};

class ActiveSet {
 public:
  ActiveSet(const Eigen::LLT<Eigen::MatrixXd>& llt, int n) : llt_(llt), n_(n) {}

  Directions directions(const std::vector<Constraint>& cons, const std::vector<int>& active,
                        const Eigen::VectorXd& c) const {
    const auto L = llt_.matrixL();
    const Eigen::VectorXd w = L.solve(c);
    const int q = static_cast<int>(active.size());
    Directions d;
    if (q == 0) {
      d.z = llt_.matrixU().solve(w);
      d.r.resize(0);
      d.degenerate = w.norm() == 0.0;
      return d;
    }
    Eigen::MatrixXd B(n_, q);
    for (int j = 0; j < q; ++j) B.col(j) = L.solve(cons[active[j]].c);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::VectorXd dv = Q.transpose() * w;
    const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
    d.r = R.triangularView<Eigen::Upper>().solve(dv.head(q));
    const Eigen::VectorXd tail = dv.tail(n_ - q);
    d.degenerate = q >= n_ || tail.norm() <= 1e-10 * w.norm();
    if (d.degenerate) {
      d.z = Eigen::VectorXd::Zero(n_);
    } else {
      d.z = llt_.matrixU().solve(Q.rightCols(n_ - q) * tail);
    }
    return d;
  }

 private:
  const Eigen::LLT<Eigen::MatrixXd>& llt_;
  int n_;
};

}  // namespace

QpResult qp_solve(const QpProblem& qp, const QpOptions& options) {
  const int n = static_cast<int>(qp.g.size());
  QpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  res.y_eq = Eigen::VectorXd::Zero(qp.Aeq.rows());
  res.y_A = Eigen::VectorXd::Zero(qp.A.rows());
  res.y_bound = Eigen::VectorXd::Zero(n);
  if (qp.H.rows() != n || qp.H.cols() != n) {
    res.status = QpStatus::kNotConvex;
    return res;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    res.status = QpStatus::kNotConvex;
    return res;
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Constraint> cons;
  const int m_eq = static_cast<int>(qp.Aeq.rows());
  for (int i = 0; i < m_eq; ++i) {
    cons.push_back({qp.Aeq.row(i).transpose(), qp.beq(i), Source::kEq, i, 1});
  }
  auto add_two_sided = [&](const Eigen::VectorXd& a, double lo, double hi, Source src, int i) {
    if (lo > hi) return false;
    if (lo > -kInf) cons.push_back({a, lo, src, i, 1});
    if (hi < kInf) cons.push_back({-a, -hi, src, i, -1});
    return true;
  };
  bool consistent = true;
  for (int i = 0; i < qp.A.rows(); ++i) {
    consistent &= add_two_sided(qp.A.row(i).transpose(), qp.lbA(i), qp.ubA(i), Source::kRow, i);
  }
  if (qp.lb.size() == n && qp.ub.size() == n) {
    for (int i = 0; i < n; ++i) {
      consistent &= add_two_sided(Eigen::VectorXd::Unit(n, i), qp.lb(i), qp.ub(i), Source::kBound, i);
    }
  }
  if (!consistent) {
    res.status = QpStatus::kInfeasible;
    return res;
  }

  const int m = static_cast<int>(cons.size());
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 10 * (n + m) + 10;
  const ActiveSet as(llt, n);
  Eigen::VectorXd x = llt.solve(-qp.g);
  std::vector<int> active;
  std::vector<double> u;
  std::vector<char> is_active(m, 0);

  auto slack = [&](int i) { return cons[i].c.dot(x) - cons[i].b; };
  auto drop = [&](int pos) {
    is_active[active[pos]] = 0;
    active.erase(active.begin() + pos);
    u.erase(u.begin() + pos);
  };
  auto finish = [&](QpStatus status) {
    res.status = status;
    res.x = x;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const Constraint& k = cons[active[j]];
      const double y = k.sign * u[j];
      switch (k.source) {
        case Source::kEq: res.y_eq(k.index) += y; break;
        case Source::kRow: res.y_A(k.index) += y; break;
        case Source::kBound: res.y_bound(k.index) += y; break;
      }
    }
    res.active_count = static_cast<int>(active.size());
    res.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
    return res;
  };

  // Equalities enter first and never leave.
  for (int e = 0; e < m_eq; ++e) {
    const Directions d = as.directions(cons, active, cons[e].c);
    const double s = slack(e);
    if (d.degenerate) {
      if (std::abs(s) > options.feasibility_tol * (1.0 + std::abs(cons[e].b))) {
        return finish(QpStatus::kInfeasible);
      }
      continue;
    }
    const double t = -s / d.z.dot(cons[e].c);
    x += t * d.z;
    for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t * d.r(static_cast<Eigen::Index>(j));
    active.push_back(e);
    u.push_back(t);
    is_active[e] = 1;
    ++res.iterations;
  }

  while (true) {
    if (res.iterations >= max_iter) return finish(QpStatus::kMaxIterations);
    int p = -1;
    double worst = 0.0;
    for (int i = m_eq; i < m; ++i) {
      if (is_active[i]) continue;
      const double s = slack(i);
      const double tol = options.feasibility_tol * (1.0 + std::abs(cons[i].b));
      if (s < -tol && s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) return finish(QpStatus::kOptimal);
    ++res.iterations;

    double u_p = 0.0;
    while (true) {
      const Directions d = as.directions(cons, active, cons[p].c);
      double t1 = std::numeric_limits<double>::infinity();
      int k = -1;
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (cons[active[j]].source == Source::kEq) continue;
        const double rj = d.r(static_cast<Eigen::Index>(j));
        if (rj > 1e-14) {
          const double ratio = u[j] / rj;
          if (ratio < t1) {
            t1 = ratio;
            k = static_cast<int>(j);
          }
        }
      }
      if (d.degenerate) {
        if (k < 0) return finish(QpStatus::kInfeasible);
        for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t1 * d.r(static_cast<Eigen::Index>(j));
        u_p += t1;
        drop(k);
        continue;
      }
      const double t2 = -slack(p) / d.z.dot(cons[p].c);
      const double t = std::min(t1, t2);
      x += t * d.z;
      for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t * d.r(static_cast<Eigen::Index>(j));
      u_p += t;
      if (t2 <= t1) {
        active.push_back(p);
        u.push_back(u_p);
        is_active[p] = 1;
        break;
      }
      drop(k);
      if (res.iterations >= max_iter) return finish(QpStatus::kMaxIterations);
      ++res.iterations;
    }
  }
}

double qp_kkt_residual(const QpProblem& qp, const QpResult& res) {
  const Eigen::VectorXd& x = res.x;
  Eigen::VectorXd grad = qp.H * x + qp.g - res.y_bound;
  if (qp.Aeq.rows() > 0) grad -= qp.Aeq.transpose() * res.y_eq;
  if (qp.A.rows() > 0) grad -= qp.A.transpose() * res.y_A;
  double worst = grad.cwiseAbs().maxCoeff();

  auto check = [&](double value, double lo, double hi, double y) {
    worst = std::max(worst, lo - value);
    worst = std::max(worst, value - hi);
    if (y > 0.0) {
      worst = std::max(worst, std::isfinite(lo) ? y * std::abs(value - lo) : y);
    } else if (y < 0.0) {
      worst = std::max(worst, std::isfinite(hi) ? -y * std::abs(hi - value) : -y);
    }
  };
  for (Eigen::Index i = 0; i < qp.Aeq.rows(); ++i) {
    worst = std::max(worst, std::abs(qp.Aeq.row(i).dot(x) - qp.beq(i)));
  }
  for (Eigen::Index i = 0; i < qp.A.rows(); ++i) check(qp.A.row(i).dot(x), qp.lbA(i), qp.ubA(i), res.y_A(i));
  if (qp.lb.size() == x.size() && qp.ub.size() == x.size()) {
    for (Eigen::Index i = 0; i < x.size(); ++i) check(x(i), qp.lb(i), qp.ub(i), res.y_bound(i));
  }
  return std::max(worst, 0.0);
}

}  // namespace pvvs
