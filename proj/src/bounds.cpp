#include "magsim/bounds.hpp"

#include <cmath>
#include <limits>

namespace magsim {

bool cs_limit_is_degenerate(const BoundParams& bp) {
  return bp.kappa_q() == 0.0 && bp.q_omega > 0.0;
}

double cs_limit(double t, const BoundParams& bp) {
  bp.validate();
  if (t < 0.0) throw std::invalid_argument("cs_limit: t must be >= 0");
  const double kq = bp.kappa_q();
  if (bp.q_omega == 0.0) return cs_limit_static(t, bp);
  if (kq == 0.0) return 0.0;  // degenerate: no dephasing floor at all

  const double s0sq = bp.sigma0 * bp.sigma0;
  const double root = std::sqrt(bp.q_omega * kq);
  const double x = t * std::sqrt(bp.q_omega / kq);
  // (root s0^2 cosh x + q kq sinh x) / (root cosh x + s0^2 sinh x), via tanh
  const double th = std::tanh(x);
  if (t == 0.0) return s0sq;
  return (root * s0sq + bp.q_omega * kq * th) / (root + s0sq * th);
}

double cs_limit_inf_prior(double t, const BoundParams& bp) {
  bp.validate();
  if (!(t > 0.0)) throw std::invalid_argument("cs_limit_inf_prior: t must be > 0");
  const double kq = bp.kappa_q();
  if (bp.q_omega == 0.0) return kq / t;
  if (kq == 0.0) return 0.0;
  const double root = std::sqrt(bp.q_omega * kq);
  const double x = t * std::sqrt(bp.q_omega / kq);
  return root / std::tanh(x);
}

double cs_limit_static(double t, const BoundParams& bp) {
  bp.validate();
  if (t < 0.0) throw std::invalid_argument("cs_limit_static: t must be >= 0");
  const double kq = bp.kappa_q();
  const double s0sq = bp.sigma0 * bp.sigma0;
  if (s0sq == 0.0) return 0.0;
  if (kq == 0.0) return 0.0;  // unbounded information rate
  return 1.0 / (1.0 / s0sq + t / kq);
}

double cs_recursion_vp(double dt, const BoundParams& bp) {
  if (!(dt > 0.0)) throw std::invalid_argument("cs_recursion_vp: dt must be > 0");
  if (bp.chi == 0.0) return bp.q_omega * dt;
  return bp.q_omega / (2.0 * bp.chi) * (1.0 - std::exp(-2.0 * bp.chi * dt));
}

double cs_recursion_vq(double dt, const BoundParams& bp) {
  if (!(dt > 0.0)) throw std::invalid_argument("cs_recursion_vq: dt must be > 0");
  return bp.kappa_coll / dt + 2.0 * bp.kappa_loc / (bp.n_atoms * dt);
}

double cs_recursion_iterated(long k, double dt, const BoundParams& bp) {
  bp.validate();
  if (k < 0) throw std::invalid_argument("cs_recursion_iterated: k must be >= 0");
  const double vp = cs_recursion_vp(dt, bp);
  const double vq = cs_recursion_vq(dt, bp);
  double v = bp.sigma0 * bp.sigma0;
  for (long i = 0; i < k; ++i) v = vp + vq * v / (vq + v);
  return v;
}

double cs_recursion(long k, double dt, const BoundParams& bp) {
  bp.validate();
  if (k < 0) throw std::invalid_argument("cs_recursion: k must be >= 0");
  const double s0sq = bp.sigma0 * bp.sigma0;
  if (k == 0) return s0sq;

  const double vp = cs_recursion_vp(dt, bp);
  const double vq = cs_recursion_vq(dt, bp);
  const double disc = std::sqrt(vp * (4.0 * vq + vp));

  const double w_plus = 2.0 * vp * vq + s0sq * vp + s0sq * disc;
  const double w_minus = -2.0 * vp * vq - s0sq * vp + s0sq * disc;
  const double u_plus = -vp + 2.0 * s0sq + disc;
  const double u_minus = vp - 2.0 * s0sq + disc;
  const double v_plus = 2.0 * vq + vp + disc;
  const double v_minus = 2.0 * vq + vp - disc;

  // factor out V+^k; (V-/V+)^k <= 1 keeps everything in range for any k
  const double ratio_k = std::pow(v_minus / v_plus, static_cast<double>(k));
  return (w_plus + w_minus * ratio_k) / (u_plus + u_minus * ratio_k);
}

double cs_limit_fluctuating_n(double t, const BoundParams& bp_at_mean_n) {
  return cs_limit_inf_prior(t, bp_at_mean_n);
}

namespace {

// D0(x) = -e^{-x} + 4 e^{-x/2} + x - 3  (= x^3/12 + ... at small x)
// D1(x) = -(4 + x) e^{-x} + 8 e^{-x/2} + x - 4  (= x^4/48 + ...)
// Direct evaluation cancels to O(x^3)/O(x^4); switch to series below 1/2.
double d0_stable(double x) {
  if (x > 0.5) return -std::exp(-x) + 4.0 * std::exp(-0.5 * x) + x - 3.0;
  // sum_{n>=3} [ -(-x)^n + 4 (-x/2)^n ] / n!
  double sum = 0.0, pow_full = x * x, pow_half = 0.25 * x * x, fact = 2.0;
  for (int n = 3; n <= 30; ++n) {
    pow_full *= -x;       // (-x)^n
    pow_half *= -0.5 * x; // (-x/2)^n
    fact *= n;
    sum += (-pow_full + 4.0 * pow_half) / fact;
  }
  return sum;
}

double d1_stable(double x) {
  if (x > 0.5) return -(4.0 + x) * std::exp(-x) + 8.0 * std::exp(-0.5 * x) + x - 4.0;
  // -(4+x) e^{-x} + 8 e^{-x/2} + x - 4 expanded: coefficient of x^n (n>=4):
  // (-1)^n [ (n - 4)/n! ] + 8 (-1/2)^n / n!
  double sum = 0.0, sign = 1.0, pow_half = 1.0, fact = 1.0;
  for (int n = 1; n <= 30; ++n) {
    sign = -sign;          // (-1)^n
    pow_half *= -0.5;      // (-1/2)^n
    fact *= n;
    if (n < 4) continue;
    sum += (sign * (n - 4.0) + 8.0 * pow_half) / fact * std::pow(x, n);
  }
  return sum;
}

}  // namespace

double kf_amse_noiseless(double t, double n_atoms, double m_strength, double eta, double sigma0) {
  if (t < 0.0) throw std::invalid_argument("kf_amse_noiseless: t must be >= 0");
  if (sigma0 == 0.0) return 0.0;  // perfect prior
  const double j = 0.5 * n_atoms;
  const double m = m_strength;
  const double x = m * t;
  const double amp = m * m / (16.0 * eta * j * j);
  const double num = amp * (1.0 + 2.0 * j * x * eta);

  double den = d0_stable(x) + 2.0 * eta * j * d1_stable(x);
  if (sigma0 > 0.0 && std::isfinite(sigma0)) {
    den += amp * (1.0 + 2.0 * j * x * eta) / (sigma0 * sigma0);
  }
  return num / den;
}

double kf_amse_hs_early(double t, double n_atoms, double m_strength, double eta) {
  return 3.0 / (n_atoms * n_atoms * eta * m_strength * t * t * t);
}

double kf_amse_hs_late(double t, double n_atoms, double m_strength, double eta) {
  return 12.0 / (n_atoms * n_atoms * eta * m_strength * t * t * t);
}

double kf_ss_error(double n_atoms, double m_strength, double eta, double q_omega,
                   double kappa_coll, double chi) {
  if (chi == 0.0) {
    return std::sqrt(q_omega * kappa_coll +
                     (2.0 / n_atoms) * std::sqrt(q_omega * q_omega * q_omega / (m_strength * eta)));
  }
  return -kappa_coll * chi +
         std::sqrt(kappa_coll * q_omega + kappa_coll * kappa_coll * chi * chi);
}

Timescales timescales(double n_atoms, double m_strength, double eta, double q_omega,
                      double kappa_coll, double t_reference) {
  if (!(n_atoms > 0 && m_strength > 0 && eta > 0))
    throw std::invalid_argument("timescales: N, M, eta must be > 0");
  Timescales ts;
  const double em = eta * m_strength;
  ts.t_cs = kappa_coll > 0.0 ? (2.0 / n_atoms) * std::sqrt(3.0 / (em * kappa_coll))
                             : std::numeric_limits<double>::infinity();
  ts.t_ss = q_omega > 0.0 ? std::sqrt(kappa_coll / q_omega)
                          : std::numeric_limits<double>::infinity();
  ts.t_ss_hs = q_omega > 0.0
                   ? std::sqrt(2.0 * std::pow(3.0, 2.0 / 3.0) / (n_atoms * std::sqrt(em * q_omega)))
                   : std::numeric_limits<double>::infinity();
  if (t_reference > 0.0) {
    ts.n_cs = kappa_coll > 0.0 ? (2.0 / t_reference) * std::sqrt(3.0 / (em * kappa_coll))
                               : std::numeric_limits<double>::infinity();
    ts.n_ss = q_omega > 0.0 ? 2.0 * std::pow(3.0, 2.0 / 3.0) /
                                  (t_reference * t_reference * std::sqrt(em * q_omega))
                            : std::numeric_limits<double>::infinity();
  }
  ts.n_ss_coll = (kappa_coll > 0.0 && q_omega > 0.0)
                     ? (2.0 / kappa_coll) * std::sqrt(q_omega / em)
                     : std::numeric_limits<double>::infinity();
  return ts;
}

double measurement_strength_from_probe(double power_watt, double detuning_hz) {
  if (!(power_watt > 0.0 && detuning_hz > 0.0))
    throw std::invalid_argument("measurement_strength_from_probe: inputs must be > 0");
  constexpr double c = 2.99792458e8;          // m/s
  constexpr double h = 6.62607015e-34;        // J s
  constexpr double r_e = 2.82e-15;            // classical electron radius [m]
  constexpr double f_osc = 0.34;              // Rb D1 oscillator strength
  constexpr double a_eff = 0.0503e-4;         // effective beam area [m^2]
  constexpr double lambda_d1 = 794.8e-9;      // Rb D1 wavelength [m]

  const double nu_d1 = c / lambda_d1;
  const double nu_probe = nu_d1 - detuning_hz;
  const double photon_flux = power_watt / (h * nu_probe);
  const double g = c * r_e * f_osc / (a_eff * detuning_hz);
  return g * g * photon_flux / 4.0;
}

double tesla_to_rad_per_s(double tesla) { return tesla * (2.0 * M_PI * 7.0e9); }
double rad_per_s_to_tesla(double rad_per_s) { return rad_per_s / (2.0 * M_PI * 7.0e9); }

}  // namespace magsim
