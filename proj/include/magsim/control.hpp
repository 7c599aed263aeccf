#pragma once

#include <stdexcept>
#include <cmath>

namespace magsim {

/// Quadratic-cost weights for the feedback law; lambda = sqrt(p_j / nu) is
/// the one knob that survives the reduced control law. p_omega is accepted
/// for config fidelity but never reaches the gain (the omega row is not
/// actuated).
struct LqrWeights {
  double p_j = 0.0;
  double p_omega = 0.0;
  double nu = 1.0;

  double lambda() const {
    if (!(nu > 0.0)) throw std::invalid_argument("LqrWeights: nu must be > 0");
    if (p_j < 0.0 || p_omega < 0.0) throw std::invalid_argument("LqrWeights: penalties must be >= 0");
    return std::sqrt(p_j / nu);
  }
};

struct LqrGain {
  double g_y = 0.0;      // coefficient on <Jy>
  double g_omega = 1.0;  // coefficient on omega
};

/// Steady-state gain row K_C = nu^{-1} B^T Lambda of the algebraic Riccati
/// solution: (lambda, 1/(1 + chi/(J lambda))). The degenerate lambda = chi = 0
/// case reports the omega gain as exactly 1 (plain field compensation).
LqrGain lqr_gain(const LqrWeights& weights, double j_spin, double chi);

/// u = -omega_hat - lambda <Jy>_hat (collective-spin units).
inline double lqr_control(double omega_hat, double jy_hat, double lambda) {
  return -omega_hat - lambda * jy_hat;
}

/// u = -omega_hat; identical to lqr_control with lambda = 0.
inline double field_compensation(double omega_hat) { return -omega_hat; }

}  // namespace magsim
