#include "magsim/cog.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <stdexcept>

namespace magsim {

MomentState cog_css_state(double n_atoms, const SignalState& signal) {
  MomentState x;
  x.mean_jx = 0.5 * n_atoms;
  x.mean_jy = 0.0;
  x.var_x = 0.0;
  x.var_y = 0.25 * n_atoms;
  x.var_z = 0.25 * n_atoms;
  x.cov_xy = 0.0;
  x.signal = signal;
  return x;
}

Eigen::Matrix<double, 7, 1> cog_drift(const MomentState& x, double u, const SensorParams& p,
                                      const OuParams& ou) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll, kl = p.kappa_loc;
  const double N = p.n_atoms;
  const double w = x.signal.omega + u;

  Eigen::Matrix<double, 7, 1> d;
  d(0) = -w * x.mean_jy - 0.5 * (kc + 2.0 * kl + M) * x.mean_jx;
  d(1) = w * x.mean_jx - 0.5 * (kc + 2.0 * kl) * x.mean_jy;
  d(2) = -2.0 * w * x.cov_xy + kc * (x.var_y + x.mean_jy * x.mean_jy - x.var_x) +
         kl * (0.5 * N - 2.0 * x.var_x) +
         M * (x.var_z - x.var_x - 4.0 * eta * x.cov_xy * x.cov_xy);
  d(3) = 2.0 * w * x.cov_xy + kc * (x.var_x + x.mean_jx * x.mean_jx - x.var_y) +
         kl * (0.5 * N - 2.0 * x.var_y) - 4.0 * eta * M * x.var_y * x.var_y;
  d(4) = M * (x.var_x + x.mean_jx * x.mean_jx - x.var_z);
  d(5) = w * (x.var_x - x.var_y) - kc * (2.0 * x.cov_xy + x.mean_jx * x.mean_jy) -
         2.0 * kl * x.cov_xy - 0.5 * M * x.cov_xy * (1.0 + 8.0 * eta * x.var_y);

  switch (x.signal.kind) {
    case SignalKind::Constant:
      d(6) = 0.0;
      break;
    case SignalKind::Ou:
      d(6) = -ou.chi * (x.signal.omega - ou.omega_bar);
      break;
    case SignalKind::Vdp:
      // the omega row of the oscillator; nu and upsilon advance externally
      d(6) = 0.0;
      break;
  }
  return d;
}

Eigen::Matrix<double, 7, 2> cog_diffusion(const MomentState& x, const SensorParams& p,
                                          const OuParams& ou) {
  const double g = 2.0 * std::sqrt(p.eta * p.measurement_strength);
  Eigen::Matrix<double, 7, 2> b = Eigen::Matrix<double, 7, 2>::Zero();
  b(0, 0) = g * x.cov_xy;
  b(1, 0) = g * x.var_y;
  if (x.signal.kind != SignalKind::Constant) b(6, 1) = std::sqrt(ou.q_omega);
  return b;
}

CogEngine::CogEngine(const SensorParams& params, const OuParams& ou, const VdpParams& vdp)
    : params_(params), ou_(ou), vdp_(vdp) {
  params_.validate();
  ou_.validate();
}

double CogEngine::step(MomentState& x, double u, double dt, double dW, double dW_omega) const {
  const double dy = step_spin(x, u, dt, dW);

  if (x.signal.kind == SignalKind::Ou) {
    // exact transition, parameterized by the same normal deviate dW_omega/sqrt(dt)
    const double g = dW_omega / std::sqrt(dt);
    if (ou_.chi == 0.0) {
      x.signal.omega += std::sqrt(ou_.q_omega * dt) * g;
    } else {
      const double decay = std::exp(-ou_.chi * dt);
      const double sd = std::sqrt(ou_.q_omega / (2.0 * ou_.chi) * (1.0 - decay * decay));
      x.signal.omega = ou_.omega_bar + (x.signal.omega - ou_.omega_bar) * decay + sd * g;
    }
  } else if (x.signal.kind == SignalKind::Vdp) {
    x.signal = vdp_step(x.signal, vdp_, dt);
    x.signal.omega += std::sqrt(ou_.q_omega) * dW_omega;
  }
  return dy;
}

double CogEngine::step_spin(MomentState& x, double u, double dt, double dW) const {
  if (!(dt > 0.0)) throw std::invalid_argument("CogEngine::step: dt must be > 0");
  const double N = params_.n_atoms;
  const double rootN = std::sqrt(N);
  const double M = params_.measurement_strength, eta = params_.eta;
  const double kc = params_.kappa_coll, kl = params_.kappa_loc;
  const double w = x.signal.omega + u;

  // sqrt(N)-normalized variables: X = <Jx>/sqrt(N), VX = Vx/N, ...
  const double X = x.mean_jx / rootN, Y = x.mean_jy / rootN;
  const double VX = x.var_x / N, VY = x.var_y / N, VZ = x.var_z / N, CXY = x.cov_xy / N;
  const double gmn = 2.0 * std::sqrt(eta * M * N);

  const double dy = 2.0 * eta * std::sqrt(M) * x.mean_jy * dt + std::sqrt(eta) * dW;

  const double Xn = X + (-w * Y - 0.5 * (kc + 2.0 * kl + M) * X) * dt + gmn * CXY * dW;
  const double Yn = Y + (w * X - 0.5 * (kc + 2.0 * kl) * Y) * dt + gmn * VY * dW;
  const double VXn = VX + (-2.0 * w * CXY + kc * (VY + Y * Y - VX) + kl * (0.5 - 2.0 * VX) +
                           M * (VZ - VX - 4.0 * eta * N * CXY * CXY)) *
                              dt;
  const double VYn = VY + (2.0 * w * CXY + kc * (VX + X * X - VY) + kl * (0.5 - 2.0 * VY) -
                           4.0 * eta * M * N * VY * VY) *
                              dt;
  const double VZn = VZ + M * (VX + X * X - VZ) * dt;
  const double CXYn = CXY + (w * (VX - VY) - kc * (2.0 * CXY + X * Y) - 2.0 * kl * CXY -
                             0.5 * M * CXY * (1.0 + 8.0 * eta * N * VY)) *
                                dt;

  x.mean_jx = Xn * rootN;
  x.mean_jy = Yn * rootN;
  const auto clamp_var = [this](double v) {
    if (v < 0.0) {
      ++clamp_count_;
      return 0.0;
    }
    return v;
  };
  x.var_x = clamp_var(VXn) * N;
  x.var_y = clamp_var(VYn) * N;
  x.var_z = clamp_var(VZn) * N;
  x.cov_xy = CXYn * N;

  if (!std::isfinite(x.mean_jx) || !std::isfinite(x.var_y)) {
    throw std::runtime_error("CogEngine::step: non-finite moment state");
  }
  return dy;
}

LgModel lg_model(double t, const SensorParams& p, const OuParams& ou) {
  if (t < 0.0) throw std::invalid_argument("lg_model: t must be >= 0");
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll;
  const double J = 0.5 * p.n_atoms;
  const double r = M + kc;
  const double decay = std::exp(-0.5 * r * t);

  LgModel m;
  m.ss.F = Eigen::MatrixXd::Zero(2, 2);
  m.ss.F(0, 1) = J * decay;
  m.ss.F(1, 1) = -ou.chi;
  m.ss.B = Eigen::MatrixXd::Zero(2, 1);
  m.ss.B(0, 0) = J * decay;
  m.ss.G = Eigen::MatrixXd::Zero(2, 2);
  m.ss.G(0, 0) = 2.0 * std::sqrt(eta * M) * vy_exact(t, p);
  m.ss.G(1, 1) = std::sqrt(ou.q_omega);
  m.ss.H = Eigen::MatrixXd::Zero(1, 2);
  m.ss.H(0, 0) = 2.0 * std::sqrt(eta * M);
  m.ss.Q = Eigen::MatrixXd::Identity(2, 2);
  m.ss.R = Eigen::MatrixXd::Constant(1, 1, eta);
  m.ss.S = Eigen::MatrixXd::Zero(2, 1);
  m.ss.S(0, 0) = std::sqrt(eta);
  return m;
}

double vy_exact(double t, const SensorParams& p) {
  p.validate();
  if (t < 0.0) throw std::invalid_argument("vy_exact: t must be >= 0");
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll;
  const double J = 0.5 * p.n_atoms;
  const double r = M + kc;

  if (kc == 0.0) return J / (2.0 + 4.0 * J * eta * M * t);
  if (eta * M == 0.0) {
    // dVy = kc J^2 e^{-r t} dt integrates directly
    return 0.5 * J + kc * J * J * (1.0 - std::exp(-r * t)) / r;
  }

  static const bool gsl_quiet = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)gsl_quiet;

  const double sqrt_ekm = std::sqrt(eta * kc * M);
  const double alpha = 2.0 * J * sqrt_ekm / r;
  const double beta = alpha * std::exp(-0.5 * r * t);

  // Scaled Bessel functions: Is(x) = I(x) e^{-x}, Ks(x) = K(x) e^{x}.
  // The regularized 0F1 terms reduce to Bessel I: 0F1~(1, a^2) = I0(2a),
  // 0F1~(2, a^2) = I1(2a)/a, so everything is expressible through I0, I1,
  // K0, K1 with the exponentials factored out analytically.
  const double i0a = gsl_sf_bessel_I0_scaled(2.0 * alpha);
  const double i1a = gsl_sf_bessel_I1_scaled(2.0 * alpha);
  const double k0a = gsl_sf_bessel_K0_scaled(2.0 * alpha);
  const double k1a = gsl_sf_bessel_K1_scaled(2.0 * alpha);
  const double i0b = gsl_sf_bessel_I0_scaled(2.0 * beta);
  const double i1b = gsl_sf_bessel_I1_scaled(2.0 * beta);
  const double k0b = gsl_sf_bessel_K0_scaled(2.0 * beta);
  const double k1b = gsl_sf_bessel_K1_scaled(2.0 * beta);

  // numerator = I1(2b)(sqrt_ekm K0(2a) - kc K1(2a)) + K1(2b)(kc I1(2a) + sqrt_ekm I0(2a))
  // denominator = 2 I0(2b)(sqrt_ekm K1(2a) - eta M K0(2a))
  //             + (2 eta M / r) K0(2b)(r I0(2a) + 2 kc J I1(2a)/a)
  // Both carry a dominant factor e^{2(a-b)}; the residual terms scale by
  // e^{-4(a-b)} <= 1 since b <= a.
  const double damp = std::exp(-4.0 * (alpha - beta));
  const double num = damp * i1b * (sqrt_ekm * k0a - kc * k1a) +
                     k1b * (kc * i1a + sqrt_ekm * i0a);
  const double den = damp * 2.0 * i0b * (sqrt_ekm * k1a - eta * M * k0a) +
                     (2.0 * eta * M / r) * k0b * (r * i0a + 2.0 * kc * J * i1a / alpha);

  const double v = J * std::exp(-0.5 * r * t) * num / den;
  if (!std::isfinite(v)) throw std::domain_error("vy_exact: parameter domain not evaluable");
  return v;
}

double vy_short_time(double t, const SensorParams& p) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll;
  const double J = 0.5 * p.n_atoms;
  return 0.5 * J * (1.0 + 2.0 * J * t * kc) / (1.0 + 2.0 * J * t * M * eta) *
         std::exp(-0.5 * (M + kc) * t);
}

double vy_long_time(double t, const SensorParams& p) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll;
  const double J = 0.5 * p.n_atoms;
  if (!(M > 0.0 && eta > 0.0)) throw std::invalid_argument("vy_long_time: requires eta M > 0");
  return 0.5 * J * std::sqrt(kc / (eta * M)) * std::exp(-0.5 * (M + kc) * t);
}

double vy_transition_time(const SensorParams& p) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll;
  const double J = 0.5 * p.n_atoms;
  if (!(M > 0.0 && eta > 0.0 && kc > 0.0))
    throw std::invalid_argument("vy_transition_time: requires eta M kc > 0");
  return 1.0 / (2.0 * J * std::sqrt(M * kc * eta));
}

JxUnconditional jx_unconditional(double t, const SensorParams& p, const OuParams& ou) {
  if (!(t > 0.0)) throw std::invalid_argument("jx_unconditional: t must be > 0");
  const double J = 0.5 * p.n_atoms;
  JxUnconditional out;
  out.value = J * std::exp(-0.5 * (p.measurement_strength + p.kappa_coll) * t);
  out.chi_ok = ou.chi <= 4.0 / (3.0 * t);
  out.q_omega_ok = ou.q_omega <= 1.5 / (t * t * t);
  return out;
}

}  // namespace magsim
