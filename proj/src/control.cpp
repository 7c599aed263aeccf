#include "magsim/control.hpp"

namespace magsim {

LqrGain lqr_gain(const LqrWeights& weights, double j_spin, double chi) {
  if (!(j_spin > 0.0)) throw std::invalid_argument("lqr_gain: J must be > 0");
  if (chi < 0.0) throw std::invalid_argument("lqr_gain: chi must be >= 0");
  const double lambda = weights.lambda();

  LqrGain gain;
  gain.g_y = lambda;
  if (lambda == 0.0 && chi == 0.0) {
    gain.g_omega = 1.0;  // degenerate corner: matches field compensation
  } else {
    gain.g_omega = 1.0 / (1.0 + chi / (j_spin * lambda));
  }
  return gain;
}

}  // namespace magsim
