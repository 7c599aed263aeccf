#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "magsim/rng.hpp"

namespace magsim {

/// Wiener increment over a step of length dt: a N(0, dt) draw.
inline double wiener_increment(RngStream& rng, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("wiener_increment: dt must be > 0");
  return std::sqrt(dt) * rng.gaussian();
}

/// One Euler-Maruyama update x' = x + drift(x) dt + diffusion(x) dW.
/// `drift` maps a state vector to a vector of the same size, `diffusion`
/// maps it to an n x m matrix acting on the m-dimensional increment dW.
template <typename Drift, typename Diffusion>
Eigen::VectorXd euler_maruyama_step(const Eigen::VectorXd& x, Drift&& drift,
                                    Diffusion&& diffusion, double dt,
                                    const Eigen::VectorXd& dW) {
  const Eigen::VectorXd a = drift(x);
  const Eigen::MatrixXd b = diffusion(x);
  if (a.size() != x.size() || b.rows() != x.size() || b.cols() != dW.size())
    throw std::invalid_argument("euler_maruyama_step: dimension mismatch");
  if (!a.allFinite() || !b.allFinite()) {
    std::ostringstream msg;
    msg << "euler_maruyama_step: non-finite drift/diffusion at x = [" << x.transpose() << "]";
    throw std::runtime_error(msg.str());
  }
  return x + a * dt + b * dW;
}

/// Scalar convenience overload.
template <typename Drift, typename Diffusion>
double euler_maruyama_step(double x, Drift&& drift, Diffusion&& diffusion, double dt, double dW) {
  const double a = drift(x);
  const double b = diffusion(x);
  if (!std::isfinite(a) || !std::isfinite(b)) {
    std::ostringstream msg;
    msg << "euler_maruyama_step: non-finite drift/diffusion at x = " << x;
    throw std::runtime_error(msg.str());
  }
  return x + a * dt + b * dW;
}

}  // namespace magsim
