#pragma once

// Independent reference computations shared by the test binaries.

#include <cmath>
#include <random>

#include "pvvs/types.hpp"

namespace pvvs::test {

/// Central difference Jacobian of f: R^n -> R^m at x.
template <class F, class In>
Eigen::MatrixXd numeric_jacobian(const F& f, const In& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    In xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    J.col(i) = (Eigen::VectorXd(f(xp)) - Eigen::VectorXd(f(xm))) / (2.0 * h);
  }
  return J;
}

/// Largest entrywise error relative to max(|ref|, floor).
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref, double floor = 1.0) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(ref.data()[i]), floor);
    e = std::max(e, std::abs(a.data()[i] - ref.data()[i]) / scale);
  }
  return e;
}

/// Error relative to the largest entry of the reference.
inline double norm_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1e-300);
  return (a - ref).cwiseAbs().maxCoeff() / scale;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
template <int N>
Eigen::Matrix<double, N, N> random_spd(std::mt19937_64& rng, double lo, double hi) {
  Eigen::Matrix<double, N, N> G;
  for (int i = 0; i < N * N; ++i) G.data()[i] = uniform(rng, -1.0, 1.0);
  const Eigen::HouseholderQR<Eigen::Matrix<double, N, N>> qr(G);
  const Eigen::Matrix<double, N, N> Qm = qr.householderQ();
  Eigen::Matrix<double, N, 1> d;
  for (int i = 0; i < N; ++i) d(i) = uniform(rng, lo, hi);
  return Qm * d.asDiagonal() * Qm.transpose();
}

}  // namespace pvvs::test
