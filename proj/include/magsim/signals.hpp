#pragma once

#include <stdexcept>

#include "magsim/rng.hpp"

namespace magsim {

/// Ornstein-Uhlenbeck field parameters: d omega = -chi (omega - omega_bar) dt + sqrt(q_omega) dW.
struct OuParams {
  double chi = 0.0;        // decay rate [1/s], >= 0
  double q_omega = 0.0;    // fluctuation strength [rad^2/s^3], >= 0
  double omega_bar = 0.0;  // long-term mean [rad/s]

  void validate() const {
    if (chi < 0.0) throw std::invalid_argument("OuParams: chi must be >= 0");
    if (q_omega < 0.0) throw std::invalid_argument("OuParams: q_omega must be >= 0");
  }
};

/// Filtered Van der Pol oscillator coefficients (heartbeat-like waveform).
struct VdpParams {
  double p = 1e3;
  double k = 1.0;
  double m = 0.00098;
  double c = 1.0;
  double T = 0.003;
  double nu0 = 0.0045;
  double omega0 = 0.0045;
  double upsilon0 = 0.0045;

  void validate() const {
    if (!(p > 0 && k > 0 && m > 0 && c > 0 && T > 0))
      throw std::invalid_argument("VdpParams: p, k, m, c, T must be > 0");
  }
};

enum class SignalKind { Constant, Ou, Vdp };

/// Instantaneous signal state: the Larmor frequency plus the auxiliary
/// Van der Pol components when applicable.
struct SignalState {
  SignalKind kind = SignalKind::Constant;
  double omega = 0.0;    // [rad/s]
  double nu = 0.0;       // VdP auxiliary
  double upsilon = 0.0;  // VdP auxiliary
};

/// Exact one-step OU transition: Gaussian with mean
/// omega_bar + (omega - omega_bar) e^{-chi dt} and variance
/// (q/2chi)(1 - e^{-2 chi dt}); q*dt when chi = 0. Exact for any dt.
inline double ou_step(double omega, const OuParams& p, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("ou_step: dt must be > 0");
  p.validate();
  double mean, var;
  if (p.chi == 0.0) {
    mean = omega;
    var = p.q_omega * dt;
  } else {
    const double decay = std::exp(-p.chi * dt);
    mean = p.omega_bar + (omega - p.omega_bar) * decay;
    var = p.q_omega / (2.0 * p.chi) * (1.0 - decay * decay);
  }
  return mean + std::sqrt(var) * rng.gaussian();
}

/// One explicit Euler step of the filtered Van der Pol system
///   d nu      = -p omega dt
///   d omega   = (k/m) nu dt + 2 (c/m)(1 - upsilon) omega dt
///   d upsilon = ((|nu| - nu)/2T) dt - (upsilon/T) dt
/// |nu| - nu at nu = 0 evaluates to 0; the expression is continuous there.
inline SignalState vdp_step(const SignalState& s, const VdpParams& vp, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("vdp_step: dt must be > 0");
  if (s.kind != SignalKind::Vdp) throw std::invalid_argument("vdp_step: state is not VdP");
  vp.validate();
  SignalState out = s;
  out.nu = s.nu - vp.p * s.omega * dt;
  out.omega = s.omega + (vp.k / vp.m) * s.nu * dt + 2.0 * (vp.c / vp.m) * (1.0 - s.upsilon) * s.omega * dt;
  out.upsilon = s.upsilon + (std::abs(s.nu) - s.nu) / (2.0 * vp.T) * dt - s.upsilon / vp.T * dt;
  return out;
}

}  // namespace magsim
