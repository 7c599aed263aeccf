#pragma once

#include <Eigen/Dense>

#include "magsim/signals.hpp"
#include "magsim/sme.hpp"
#include "magsim/statespace.hpp"

namespace magsim {

/// Co-moving Gaussian conditional state: first and second spin moments in
/// collective-spin units plus the signal variables.
struct MomentState {
  double mean_jx = 0.0;
  double mean_jy = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double var_z = 0.0;
  double cov_xy = 0.0;
  SignalState signal;
};

/// CSS-along-x initial moments (N/2, 0, 0, N/4, N/4, 0).
MomentState cog_css_state(double n_atoms, const SignalState& signal);

/// Deterministic right-hand sides of the seven coupled moment SDEs,
/// ordered (mean_jx, mean_jy, var_x, var_y, var_z, cov_xy, omega).
/// The omega row carries the signal drift of the active variant.
Eigen::Matrix<double, 7, 1> cog_drift(const MomentState& x, double u, const SensorParams& p,
                                      const OuParams& ou);

/// Diffusion coefficients: column 0 the measurement-noise (dW) channel,
/// column 1 the field-noise (dW_omega) channel. Second moments carry no
/// noise after the third-order cut-off.
Eigen::Matrix<double, 7, 2> cog_diffusion(const MomentState& x, const SensorParams& p,
                                          const OuParams& ou);

/// Stateful stepper: Euler-Maruyama on the sqrt(N)-normalized variables,
/// de-normalized at the interface. Negative variances are clamped to zero
/// and counted rather than failing (coarse-dt overshoot of the -4 eta M Vy^2
/// term shows up here).
class CogEngine {
 public:
  CogEngine(const SensorParams& params, const OuParams& ou, const VdpParams& vdp = {});

  /// Full step: spin moments plus the signal row (exact OU transition or
  /// VdP Euler with the white-field distortion). Returns the photocurrent
  /// increment dy = 2 eta sqrt(M) <Jy> dt + sqrt(eta) dW.
  double step(MomentState& x, double u, double dt, double dW, double dW_omega) const;

  /// Spin-moment rows only; the signal is advanced by the caller.
  double step_spin(MomentState& x, double u, double dt, double dW) const;

  long clamp_count() const { return clamp_count_; }

  const SensorParams& params() const { return params_; }
  const OuParams& ou() const { return ou_; }
  const VdpParams& vdp() const { return vdp_; }

 private:
  SensorParams params_;
  OuParams ou_;
  VdpParams vdp_;
  mutable long clamp_count_ = 0;
};

/// Weak-field linear-Gaussian model around the x-polarized state:
///   F = [[0, J e^{-r t/2}], [0, -chi]],  r = M + kappa_coll, J = N/2,
///   G = diag(2 sqrt(eta M) Vy(t), sqrt(q_omega)),  H = 2 sqrt(eta M) [1 0],
///   Q = I, R = eta, S = (sqrt(eta), 0)^T,  B = (J e^{-r t/2}, 0)^T.
struct LgModel {
  StateSpaceModel ss;
};

LgModel lg_model(double t, const SensorParams& p, const OuParams& ou);

/// Exact conditional variance Vy(t) of the decoupled LG variance equation
///   dVy = -4 eta M Vy^2 dt + kc J^2 e^{-(M+kc) t} dt,   Vy(0) = J/2,
/// in terms of scaled modified Bessel functions. kc = 0 falls back to the
/// noiseless closed form J / (2 + 4 J eta M t).
double vy_exact(double t, const SensorParams& p);

/// Short-time regime (J/2)(1 + 2Jt kc)/(1 + 2Jt M eta) e^{-(M+kc)t/2}.
double vy_short_time(double t, const SensorParams& p);

/// Long-time regime (J/2) sqrt(kc / (eta M)) e^{-(M+kc)t/2}.
double vy_long_time(double t, const SensorParams& p);

/// Regime transition time t* = 1 / (2 J sqrt(M kc eta)).
double vy_transition_time(const SensorParams& p);

/// Unconditional polarization J e^{-(M+kc)t/2} and the validity flags
/// chi <= 4/(3t) and q_omega <= 3/(2 t^3) for a fluctuating field.
struct JxUnconditional {
  double value = 0.0;
  bool chi_ok = true;
  bool q_omega_ok = true;
};

JxUnconditional jx_unconditional(double t, const SensorParams& p, const OuParams& ou);

}  // namespace magsim
