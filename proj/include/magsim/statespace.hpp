#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace magsim {

/// Continuous-time linear Gaussian model
///   dx = F x dt + B u dt + G dw,   dy = H x dt + dv,
/// with E[dw dw^T] = Q dt, E[dv dv^T] = R dt, E[dw dv^T] = S dt.
struct StateSpaceModel {
  Eigen::MatrixXd F, B, G, H;
  Eigen::MatrixXd Q, R, S;
};

/// Discrete-time equivalent x_k = A x_{k-1} + B u + G q, y_k = H x_k + r.
struct DiscreteModel {
  Eigen::MatrixXd A, B, G, H;
  Eigen::MatrixXd Q, R;
};

/// First-order discretization of a continuous LG model on a grid of step dt:
/// A = I + F dt, B_k = B dt, G_k = G dt, H_k = H, Q_k = Q/dt, R_k = R/dt.
inline DiscreteModel lg_discretize(const Eigen::MatrixXd& F, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                   double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("lg_discretize: dt must be > 0");
  const auto n = F.rows();
  if (F.cols() != n || B.rows() != n || G.rows() != n || H.cols() != n)
    throw std::invalid_argument("lg_discretize: state dimension mismatch");
  if (Q.rows() != Q.cols() || Q.rows() != G.cols())
    throw std::invalid_argument("lg_discretize: Q must be square matching G columns");
  if (R.rows() != R.cols() || R.rows() != H.rows())
    throw std::invalid_argument("lg_discretize: R must be square matching H rows");
  DiscreteModel d;
  d.A = Eigen::MatrixXd::Identity(n, n) + F * dt;
  d.B = B * dt;
  d.G = G * dt;
  d.H = H;
  d.Q = Q / dt;
  d.R = R / dt;
  return d;
}

inline DiscreteModel lg_discretize(const StateSpaceModel& m, double dt) {
  return lg_discretize(m.F, m.B, m.G, m.H, m.Q, m.R, dt);
}

}  // namespace magsim
