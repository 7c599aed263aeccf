#pragma once

#include <stdexcept>

namespace magsim {

/// Parameters of the classically-simulated precision limits. All bound
/// outputs are variances [rad^2/s^2]; callers report sqrt alongside.
struct BoundParams {
  double q_omega = 0.0;     // [rad^2/s^3]
  double kappa_coll = 0.0;  // [Hz]
  double kappa_loc = 0.0;   // [Hz]
  double n_atoms = 1.0;
  double sigma0 = 0.0;      // prior standard deviation [rad/s]
  double chi = 0.0;         // OU decay entering the discrete recursion

  double kappa_q() const { return kappa_coll + 2.0 * kappa_loc / n_atoms; }

  void validate() const {
    if (q_omega < 0 || kappa_coll < 0 || kappa_loc < 0 || n_atoms < 1 || sigma0 < 0 || chi < 0)
      throw std::invalid_argument("BoundParams: parameters must be non-negative, N >= 1");
  }
};

/// Finite-prior bound V_CS^{sigma0}(t): the cosh/sinh expression with
/// argument t sqrt(q / kappa_Q), evaluated through tanh so that huge
/// arguments cannot overflow. q_omega = 0 routes to the static form.
/// kappa_Q = 0 with q_omega > 0 degenerates to 0 (flag via is_degenerate).
double cs_limit(double t, const BoundParams& bp);
bool cs_limit_is_degenerate(const BoundParams& bp);

/// Infinitely wide prior: sqrt(q kappa_Q) coth(t sqrt(q/kappa_Q)); ~kappa_Q/t
/// at small t and sqrt(q kappa_Q) in the steady state.
double cs_limit_inf_prior(double t, const BoundParams& bp);

/// Static field (q_omega = 0): 1/(1/sigma0^2 + t/kappa_Q); the
/// sigma0 -> infinity limit kappa_Q/t carries the standard quantum limit.
double cs_limit_static(double t, const BoundParams& bp);

/// Discrete one-step variances entering the recursion.
double cs_recursion_vp(double dt, const BoundParams& bp);  // (q/2chi)(1 - e^{-2 chi dt})
double cs_recursion_vq(double dt, const BoundParams& bp);  // kappa_Q / dt

/// k-step bound V_CS^(k) from V^(0) = sigma0^2 via the closed form
/// (W+ V+^k + W- V-^k)/(U- V-^k + U+ V+^k), evaluated with the dominant
/// branch factored out so large k cannot overflow.
double cs_recursion(long k, double dt, const BoundParams& bp);

/// Direct iteration of V^(k) = Vp + Vq V^(k-1)/(Vq + V^(k-1)); the closed
/// form must agree with this to rounding.
double cs_recursion_iterated(long k, double dt, const BoundParams& bp);

/// Jensen lower bound for a Gaussian-fluctuating atom number in the
/// infinite-prior regime: the bound at the mean atom count.
double cs_limit_fluctuating_n(double t, const BoundParams& bp_at_mean_n);

/// Closed-form aMSE of the noiseless Kalman solution
/// (kappa = 0, q_omega = chi = 0) with finite prior sigma0; the denominator
/// is evaluated by series below x = M t = 1/2 where its O(x^3)/O(x^4)
/// cancellations would otherwise destroy precision.
double kf_amse_noiseless(double t, double n_atoms, double m_strength, double eta, double sigma0);

/// The two super-classical approximations 3/(N^2 eta M t^3) and
/// 12/(N^2 eta M t^3) of the noiseless solution at infinite prior.
double kf_amse_hs_early(double t, double n_atoms, double m_strength, double eta);
double kf_amse_hs_late(double t, double n_atoms, double m_strength, double eta);

/// Steady-state Kalman error: chi = 0 form
/// sqrt(q kc + (2/N) sqrt(q^3/(M eta))), chi != 0 form
/// -kc chi + sqrt(kc q + kc^2 chi^2).
double kf_ss_error(double n_atoms, double m_strength, double eta, double q_omega,
                   double kappa_coll, double chi);

/// Characteristic times and atom numbers of the weak-field error curve.
struct Timescales {
  double t_cs = 0.0;    // (2/N) sqrt(3/(eta M kc))
  double t_ss = 0.0;    // sqrt(kc / q)
  double t_ss_hs = 0.0; // sqrt(2 * 3^(2/3) / (N sqrt(eta M q)))
  double n_cs = 0.0;    // (2/t) sqrt(3/(eta M kc))
  double n_ss = 0.0;    // 2 * 3^(2/3) / (t^2 sqrt(eta M q))
  double n_ss_coll = 0.0; // (2/kc) sqrt(q/(eta M))
};

Timescales timescales(double n_atoms, double m_strength, double eta, double q_omega,
                      double kappa_coll, double t_reference);

/// Measurement strength from probe power and detuning, M = g^2 Ndot / 4.
double measurement_strength_from_probe(double power_watt, double detuning_hz);

/// Rb-87 field conversion, 2 pi x 7 GHz/T.
double tesla_to_rad_per_s(double tesla);
double rad_per_s_to_tesla(double rad_per_s);

}  // namespace magsim
