#pragma once

#include <Eigen/Dense>
#include <memory>

#include "magsim/cog.hpp"
#include "magsim/signals.hpp"
#include "magsim/sme.hpp"
#include "magsim/statespace.hpp"

namespace magsim {

/// Estimate and error covariance. The covariance is symmetrized on every
/// step; eigenvalues in [-1e-8, 0) are clipped to zero, anything lower is a
/// hard failure.
struct FilterState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd sigma;
};

struct NoiseSpec {
  Eigen::MatrixXd Q, R, S;
};

/// Enforce symmetry and the small-negative-eigenvalue clip on sigma.
/// Returns the symmetrization residual that was removed.
double condition_covariance(Eigen::MatrixXd& sigma, double clip_tol = 1e-8);

/// Discrete uncorrelated Kalman filter step: predict with (A, B, G, Q), gain
/// K = S_p H^T (H S_p H^T + R)^{-1}, then the measurement update.
FilterState kf_discrete_step(const FilterState& fs, const Eigen::VectorXd& y,
                             const DiscreteModel& model,
                             const Eigen::VectorXd& u = Eigen::VectorXd());

/// Continuous correlated Kalman-Bucy step on the measurement increment dy
/// over dt (dy = y(t) dt):
///   K = (Sigma H^T - G S) R^{-1}
///   dx = (F x + B u) dt + K (dy - H x dt)
///   dSigma = (F Sigma + Sigma F^T - K R K^T + G Q G^T) dt.
FilterState kb_correlated_step(const FilterState& fs, const Eigen::VectorXd& dy,
                               const StateSpaceModel& model, const Eigen::VectorXd& u, double dt);

/// Riccati right-hand side shared by the continuous filters.
Eigen::MatrixXd riccati_rhs(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& F,
                            const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                            const Eigen::MatrixXd& S);

/// Nonlinear model interface for the extended Kalman filter: drift with
/// noises set to zero, scalar measurement, and the Jacobians re-evaluated at
/// the current estimate.
class EkfModel {
 public:
  virtual ~EkfModel() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd f(const Eigen::VectorXd& x, double u) const = 0;
  virtual double h(const Eigen::VectorXd& x) const = 0;
  virtual void jacobians(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& F,
                         Eigen::MatrixXd& G, Eigen::RowVectorXd& H) const = 0;
  virtual NoiseSpec noise() const = 0;
};

/// EKF step along the photocurrent increment dy:
///   dx = f(x, u) dt + K (dy - h(x) dt),  K = (Sigma H^T - G S) R^{-1},
/// with the covariance advanced by the correlated Riccati equation.
FilterState ekf_step(const FilterState& fs, double dy, double dt, double u, const EkfModel& model);

/// Gradient matrices of the sqrt(N)-normalized moment model driven by an OU
/// field; state (X, Y, VX, VY, VZ, CXY, omega). The filter-side OU
/// parameters may differ from the truth (mismatched-model runs).
void ekf_jacobians_ou(const Eigen::VectorXd& x_hat, double u, const SensorParams& p,
                      const OuParams& ou, Eigen::MatrixXd& F, Eigen::MatrixXd& G,
                      Eigen::RowVectorXd& H);

/// Same for the Van der Pol signal; state (X, Y, VX, VY, VZ, CXY, nu, omega,
/// upsilon). The sign term nu/|nu| is evaluated as 0 at nu = 0.
void ekf_jacobians_vdp(const Eigen::VectorXd& x_hat, double u, const SensorParams& p,
                       const VdpParams& vdp, double q_distortion, Eigen::MatrixXd& F,
                       Eigen::MatrixXd& G, Eigen::RowVectorXd& H);

/// 7-state EKF model: CoG moments + OU field.
class CogOuEkfModel : public EkfModel {
 public:
  CogOuEkfModel(const SensorParams& p, const OuParams& filter_ou);
  int dim() const override { return 7; }
  Eigen::VectorXd f(const Eigen::VectorXd& x, double u) const override;
  double h(const Eigen::VectorXd& x) const override;
  void jacobians(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& F, Eigen::MatrixXd& G,
                 Eigen::RowVectorXd& H) const override;
  NoiseSpec noise() const override;

  /// Initial estimate for a CSS start and Gaussian omega prior.
  FilterState initial_state(double mu0, double sigma0) const;

  const SensorParams& params() const { return p_; }

 private:
  SensorParams p_;
  OuParams ou_;
};

/// 9-state EKF model: CoG moments + filtered Van der Pol signal.
class CogVdpEkfModel : public EkfModel {
 public:
  CogVdpEkfModel(const SensorParams& p, const VdpParams& filter_vdp, double q_distortion);
  int dim() const override { return 9; }
  Eigen::VectorXd f(const Eigen::VectorXd& x, double u) const override;
  double h(const Eigen::VectorXd& x) const override;
  void jacobians(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& F, Eigen::MatrixXd& G,
                 Eigen::RowVectorXd& H) const override;
  NoiseSpec noise() const override;

  FilterState initial_state(double mu0, double sigma0) const;

 private:
  SensorParams p_;
  VdpParams vdp_;
  double q_distortion_;
};

}  // namespace magsim
