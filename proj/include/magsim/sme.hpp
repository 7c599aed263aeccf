#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "magsim/spin.hpp"

namespace magsim {

/// Physical sensor parameters. n_atoms is a double so that ensemble sizes up
/// to ~1e15 stay exact; engines that need the integer count round it.
struct SensorParams {
  double n_atoms = 0;
  double measurement_strength = 0.0;  // M [Hz]
  double eta = 1.0;                   // detection efficiency in [0,1]
  double kappa_coll = 0.0;            // collective dephasing rate [Hz]
  double kappa_loc = 0.0;             // local dephasing rate [Hz]

  void validate() const {
    if (n_atoms < 1) throw std::invalid_argument("SensorParams: N must be >= 1");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("SensorParams: eta must be in [0,1]");
    if (measurement_strength < 0.0 || kappa_coll < 0.0 || kappa_loc < 0.0)
      throw std::invalid_argument("SensorParams: rates must be >= 0");
  }
};

/// Dissipative superoperator D[L] rho = L rho L^+ - (1/2){L^+ L, rho}.
Eigen::MatrixXcd superop_D(const Eigen::MatrixXcd& L, const Eigen::MatrixXcd& rho);

/// Nonlinear measurement superoperator
/// H[L] rho = L rho + rho L^+ - tr[(L + L^+) rho] rho.
Eigen::MatrixXcd superop_H(const Eigen::MatrixXcd& L, const Eigen::MatrixXcd& rho);

/// One step of the conditional evolution.
struct StepRecord {
  double dy = 0.0;  // photocurrent increment 2 eta sqrt(M) <Jy> dt + sqrt(eta) dW
  double dW = 0.0;  // the Wiener increment used for the state update
  SpinMoments moments;
};

/// Exact conditional-state engine on the symmetric subspace (requires
/// kappa_loc = 0; local dephasing leaves j = N/2 and is handled by
/// FullHilbertEngine at small N or the moment model at large N).
///
/// The update is a positivity-preserving Kraus step
///   M0 = I - (i(omega+u) Jz + (1/2)(M Jy^2 + kc Jz^2)) dt
///        + sqrt(eta) L dy_R + (eta/2) L^2 (dy_R^2 - dt),   L = sqrt(M) Jy,
///   rho' = M0 rho M0^+ + (1-eta) L rho L^+ dt + kc Jz rho Jz dt,
/// renormalized by its trace, with the Rouchon-normalized record
/// dy_R = 2 sqrt(eta M) <Jy> dt + dW.
class SmeEngine {
 public:
  SmeEngine(const SensorParams& params, int n_atoms);

  StepRecord step(DickeState& state, double omega, double u, double dt, double dW) const;

  /// Throws with diagnostics if trace/Hermiticity/positivity exceed tolerance.
  void check_invariants(const DickeState& state) const;

  const CollectiveOps& ops() const { return ops_; }
  const SensorParams& params() const { return params_; }

  double trace_tol = 1e-10;
  double herm_tol = 1e-12;
  double positivity_tol = 1e-10;

 private:
  SensorParams params_;
  CollectiveOps ops_;
  Eigen::MatrixXcd jy2_, jz2_;
};

/// Exact engine on the full 2^N product space, including the local dephasing
/// channels (kappa_loc/2) sum_j D[sigma_z^(j)]. Restricted to N <= 12.
class FullHilbertEngine {
 public:
  FullHilbertEngine(const SensorParams& params, int n_atoms);

  /// rho is a 2^N x 2^N density matrix; contract identical to SmeEngine::step.
  StepRecord step(Eigen::MatrixXcd& rho, double omega, double u, double dt, double dW) const;

  /// Density matrix of the CSS along +x on the product space.
  Eigen::MatrixXcd css_x_full() const;

  SpinMoments moments_full(const Eigen::MatrixXcd& rho) const;

  int n_atoms() const { return n_; }
  int dim() const { return 1 << n_; }

 private:
  Eigen::MatrixXcd apply_jy_left(const Eigen::MatrixXcd& a) const;   // Jy * a
  Eigen::MatrixXcd apply_jz_left(const Eigen::MatrixXcd& a) const;   // Jz * a

  SensorParams params_;
  int n_;
  Eigen::VectorXd jz_diag_;  // Jz eigenvalues per basis index
};

/// Pointwise ensemble average of per-trajectory moment series (outer index
/// trajectory, inner index time). All series must share the grid length.
std::vector<SpinMoments> unconditional_average(const std::vector<std::vector<SpinMoments>>& trajectories);

/// Averaged conditional states (same grid contract) for unconditional
/// squeezing evaluation.
std::vector<DickeState> unconditional_average_states(const std::vector<std::vector<DickeState>>& trajectories);

}  // namespace magsim
