#include "magsim/filters.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace magsim {

double condition_covariance(Eigen::MatrixXd& sigma, double clip_tol) {
  const Eigen::MatrixXd asym = 0.5 * (sigma - sigma.transpose());
  const double residual = asym.cwiseAbs().maxCoeff();
  sigma = 0.5 * (sigma + sigma.transpose());

  // cheap positive-definiteness probe first; exact states (rank-deficient
  // priors) and rounding-level negatives go through the eigenvalue clip
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) return residual;

  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.minCoeff() < -clip_tol * scale) {
    std::ostringstream msg;
    msg << "condition_covariance: eigenvalue " << ev.minCoeff() << " below clip tolerance";
    throw std::runtime_error(msg.str());
  }
  if (ev.minCoeff() < 0.0) {
    Eigen::VectorXd clipped = ev.cwiseMax(0.0);
    sigma = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  }
  return residual;
}

FilterState kf_discrete_step(const FilterState& fs, const Eigen::VectorXd& y,
                             const DiscreteModel& model, const Eigen::VectorXd& u) {
  FilterState out;
  out.x_hat = model.A * fs.x_hat;
  if (u.size() > 0) out.x_hat += model.B * u;
  Eigen::MatrixXd sp = model.A * fs.sigma * model.A.transpose() +
                       model.G * model.Q * model.G.transpose();

  const Eigen::MatrixXd innov_cov = model.H * sp * model.H.transpose() + model.R;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(innov_cov);
  if (!lu.isInvertible())
    throw std::runtime_error("kf_discrete_step: singular innovation covariance");
  const Eigen::MatrixXd gain = sp * model.H.transpose() * lu.inverse();

  out.x_hat += gain * (y - model.H * out.x_hat);
  out.sigma = (Eigen::MatrixXd::Identity(sp.rows(), sp.cols()) - gain * model.H) * sp;
  condition_covariance(out.sigma);
  return out;
}

Eigen::MatrixXd riccati_rhs(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& F,
                            const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                            const Eigen::MatrixXd& S) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
  if (!lu.isInvertible()) throw std::runtime_error("riccati_rhs: singular R");
  const Eigen::MatrixXd r_inv = lu.inverse();
  const Eigen::MatrixXd gain = (sigma * H.transpose() - G * S) * r_inv;
  return F * sigma + sigma * F.transpose() - gain * R * gain.transpose() +
         G * Q * G.transpose();
}

FilterState kb_correlated_step(const FilterState& fs, const Eigen::VectorXd& dy,
                               const StateSpaceModel& m, const Eigen::VectorXd& u, double dt) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m.R);
  if (!lu.isInvertible()) throw std::runtime_error("kb_correlated_step: singular R");
  const Eigen::MatrixXd gain = (fs.sigma * m.H.transpose() - m.G * m.S) * lu.inverse();

  FilterState out;
  out.x_hat = fs.x_hat + m.F * fs.x_hat * dt + gain * (dy - m.H * fs.x_hat * dt);
  if (u.size() > 0) out.x_hat += m.B * u * dt;
  out.sigma = fs.sigma + riccati_rhs(fs.sigma, m.F, m.G, m.H, m.Q, m.R, m.S) * dt;
  condition_covariance(out.sigma);
  return out;
}

FilterState ekf_step(const FilterState& fs, double dy, double dt, double u,
                     const EkfModel& model) {
  Eigen::MatrixXd F, G;
  Eigen::RowVectorXd H;
  model.jacobians(fs.x_hat, u, F, G, H);
  if (!F.allFinite() || !G.allFinite() || !H.allFinite()) {
    std::ostringstream msg;
    msg << "ekf_step: non-finite Jacobian at x_hat = [" << fs.x_hat.transpose() << "]";
    throw std::runtime_error(msg.str());
  }
  const NoiseSpec noise = model.noise();
  const double r = noise.R(0, 0);
  const Eigen::VectorXd gain = (fs.sigma * H.transpose() - G * noise.S) / r;

  FilterState out;
  out.x_hat = fs.x_hat + model.f(fs.x_hat, u) * dt + gain * (dy - model.h(fs.x_hat) * dt);
  out.sigma = fs.sigma + riccati_rhs(fs.sigma, F, G, H, noise.Q, noise.R, noise.S) * dt;
  condition_covariance(out.sigma);
  return out;
}

namespace {

// Spin block of the normalized-model gradient; identical for both signal
// models apart from the column index of omega.
void fill_spin_jacobian(Eigen::MatrixXd& F, const Eigen::VectorXd& x, double u,
                        const SensorParams& p, int omega_col) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll, kl = p.kappa_loc;
  const double N = p.n_atoms;
  const double w = x(omega_col) + u;
  const double X = x(0), Y = x(1), VY = x(3), CXY = x(5);

  F(0, 0) = -0.5 * (kc + 2.0 * kl + M);
  F(0, 1) = -w;
  F(0, omega_col) = -Y;

  F(1, 0) = w;
  F(1, 1) = -0.5 * (kc + 2.0 * kl);
  F(1, omega_col) = X;

  F(2, 1) = 2.0 * kc * Y;
  F(2, 2) = -(kc + 2.0 * kl + M);
  F(2, 3) = kc;
  F(2, 4) = M;
  F(2, 5) = -2.0 * w - 8.0 * eta * M * N * CXY;
  F(2, omega_col) = -2.0 * CXY;

  F(3, 0) = 2.0 * kc * X;
  F(3, 2) = kc;
  F(3, 3) = -kc - 2.0 * kl - 8.0 * eta * M * N * VY;
  F(3, 5) = 2.0 * w;
  F(3, omega_col) = 2.0 * CXY;

  F(4, 0) = 2.0 * M * X;
  F(4, 2) = M;
  F(4, 4) = -M;

  F(5, 0) = -kc * Y;
  F(5, 1) = -kc * X;
  F(5, 2) = w;
  F(5, 3) = -w - 4.0 * eta * M * N * CXY;
  F(5, 5) = -(2.0 * kc + 2.0 * kl + 0.5 * M) - 4.0 * eta * M * N * VY;
  F(5, omega_col) = x(2) - x(3);
}

// Normalized spin drift rows (X, Y, VX, VY, VZ, CXY) given omega.
void fill_spin_drift(Eigen::VectorXd& d, const Eigen::VectorXd& x, double u,
                     const SensorParams& p, double omega) {
  const double M = p.measurement_strength, eta = p.eta, kc = p.kappa_coll, kl = p.kappa_loc;
  const double N = p.n_atoms;
  const double w = omega + u;
  const double X = x(0), Y = x(1), VX = x(2), VY = x(3), VZ = x(4), CXY = x(5);

  d(0) = -w * Y - 0.5 * (kc + 2.0 * kl + M) * X;
  d(1) = w * X - 0.5 * (kc + 2.0 * kl) * Y;
  d(2) = -2.0 * w * CXY + kc * (VY + Y * Y - VX) + kl * (0.5 - 2.0 * VX) +
         M * (VZ - VX - 4.0 * eta * N * CXY * CXY);
  d(3) = 2.0 * w * CXY + kc * (VX + X * X - VY) + kl * (0.5 - 2.0 * VY) -
         4.0 * eta * M * N * VY * VY;
  d(4) = M * (VX + X * X - VZ);
  d(5) = w * (VX - VY) - kc * (2.0 * CXY + X * Y) - 2.0 * kl * CXY -
         0.5 * M * CXY * (1.0 + 8.0 * eta * N * VY);
}

}  // namespace

void ekf_jacobians_ou(const Eigen::VectorXd& x_hat, double u, const SensorParams& p,
                      const OuParams& ou, Eigen::MatrixXd& F, Eigen::MatrixXd& G,
                      Eigen::RowVectorXd& H) {
  if (x_hat.size() != 7) throw std::invalid_argument("ekf_jacobians_ou: state must be 7-dim");
  const double M = p.measurement_strength, eta = p.eta, N = p.n_atoms;

  F = Eigen::MatrixXd::Zero(7, 7);
  fill_spin_jacobian(F, x_hat, u, p, 6);
  F(6, 6) = -ou.chi;

  G = Eigen::MatrixXd::Zero(7, 2);
  G(0, 0) = 2.0 * std::sqrt(eta * M * N) * x_hat(5);
  G(1, 0) = 2.0 * std::sqrt(eta * M * N) * x_hat(3);
  G(6, 1) = std::sqrt(ou.q_omega);

  H = Eigen::RowVectorXd::Zero(7);
  H(1) = 2.0 * eta * std::sqrt(M * N);
}

void ekf_jacobians_vdp(const Eigen::VectorXd& x_hat, double u, const SensorParams& p,
                       const VdpParams& vdp, double q_distortion, Eigen::MatrixXd& F,
                       Eigen::MatrixXd& G, Eigen::RowVectorXd& H) {
  if (x_hat.size() != 9) throw std::invalid_argument("ekf_jacobians_vdp: state must be 9-dim");
  const double M = p.measurement_strength, eta = p.eta, N = p.n_atoms;
  const double nu = x_hat(6), omega = x_hat(7), ups = x_hat(8);

  F = Eigen::MatrixXd::Zero(9, 9);
  fill_spin_jacobian(F, x_hat, u, p, 7);

  F(6, 7) = -vdp.p;
  F(7, 6) = vdp.k / vdp.m;
  F(7, 7) = 2.0 * vdp.c * (1.0 - ups) / vdp.m;
  F(7, 8) = -2.0 * vdp.c * omega / vdp.m;
  // d/dnu of (|nu| - nu)/(2T): (sign(nu) - 1)/(2T); sign(0) taken as 0
  const double sgn = (nu > 0.0) ? 1.0 : (nu < 0.0 ? -1.0 : 0.0);
  F(8, 6) = (sgn - 1.0) / (2.0 * vdp.T);
  F(8, 8) = -1.0 / vdp.T;

  G = Eigen::MatrixXd::Zero(9, 2);
  G(0, 0) = 2.0 * std::sqrt(eta * M * N) * x_hat(5);
  G(1, 0) = 2.0 * std::sqrt(eta * M * N) * x_hat(3);
  G(7, 1) = std::sqrt(q_distortion);

  H = Eigen::RowVectorXd::Zero(9);
  H(1) = 2.0 * eta * std::sqrt(M * N);
}

CogOuEkfModel::CogOuEkfModel(const SensorParams& p, const OuParams& filter_ou)
    : p_(p), ou_(filter_ou) {
  p_.validate();
  ou_.validate();
}

Eigen::VectorXd CogOuEkfModel::f(const Eigen::VectorXd& x, double u) const {
  Eigen::VectorXd d(7);
  fill_spin_drift(d, x, u, p_, x(6));
  d(6) = -ou_.chi * (x(6) - ou_.omega_bar);
  return d;
}

double CogOuEkfModel::h(const Eigen::VectorXd& x) const {
  return 2.0 * p_.eta * std::sqrt(p_.measurement_strength * p_.n_atoms) * x(1);
}

void CogOuEkfModel::jacobians(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& F,
                              Eigen::MatrixXd& G, Eigen::RowVectorXd& H) const {
  ekf_jacobians_ou(x, u, p_, ou_, F, G, H);
}

NoiseSpec CogOuEkfModel::noise() const {
  NoiseSpec n;
  n.Q = Eigen::MatrixXd::Identity(2, 2);
  n.R = Eigen::MatrixXd::Constant(1, 1, p_.eta);
  n.S = Eigen::MatrixXd::Zero(2, 1);
  n.S(0, 0) = std::sqrt(p_.eta);
  return n;
}

FilterState CogOuEkfModel::initial_state(double mu0, double sigma0) const {
  FilterState fs;
  fs.x_hat = Eigen::VectorXd::Zero(7);
  fs.x_hat(0) = 0.5 * std::sqrt(p_.n_atoms);  // X = (N/2)/sqrt(N)
  fs.x_hat(3) = 0.25;
  fs.x_hat(4) = 0.25;
  fs.x_hat(6) = mu0;
  fs.sigma = Eigen::MatrixXd::Zero(7, 7);
  fs.sigma(6, 6) = sigma0 * sigma0;
  return fs;
}

CogVdpEkfModel::CogVdpEkfModel(const SensorParams& p, const VdpParams& filter_vdp,
                               double q_distortion)
    : p_(p), vdp_(filter_vdp), q_distortion_(q_distortion) {
  p_.validate();
  vdp_.validate();
}

Eigen::VectorXd CogVdpEkfModel::f(const Eigen::VectorXd& x, double u) const {
  Eigen::VectorXd d(9);
  Eigen::VectorXd spin = x.head(6);
  Eigen::VectorXd tmp(6);
  fill_spin_drift(tmp, spin, u, p_, x(7));
  d.head(6) = tmp;
  const double nu = x(6), omega = x(7), ups = x(8);
  d(6) = -vdp_.p * omega;
  d(7) = vdp_.k / vdp_.m * nu + 2.0 * vdp_.c / vdp_.m * (1.0 - ups) * omega;
  d(8) = (std::abs(nu) - nu) / (2.0 * vdp_.T) - ups / vdp_.T;
  return d;
}

double CogVdpEkfModel::h(const Eigen::VectorXd& x) const {
  return 2.0 * p_.eta * std::sqrt(p_.measurement_strength * p_.n_atoms) * x(1);
}

void CogVdpEkfModel::jacobians(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& F,
                               Eigen::MatrixXd& G, Eigen::RowVectorXd& H) const {
  ekf_jacobians_vdp(x, u, p_, vdp_, q_distortion_, F, G, H);
}

NoiseSpec CogVdpEkfModel::noise() const {
  NoiseSpec n;
  n.Q = Eigen::MatrixXd::Identity(2, 2);
  n.R = Eigen::MatrixXd::Constant(1, 1, p_.eta);
  n.S = Eigen::MatrixXd::Zero(2, 1);
  n.S(0, 0) = std::sqrt(p_.eta);
  return n;
}

FilterState CogVdpEkfModel::initial_state(double mu0, double sigma0) const {
  FilterState fs;
  fs.x_hat = Eigen::VectorXd::Zero(9);
  fs.x_hat(0) = 0.5 * std::sqrt(p_.n_atoms);
  fs.x_hat(3) = 0.25;
  fs.x_hat(4) = 0.25;
  fs.x_hat(6) = vdp_.nu0;
  fs.x_hat(7) = mu0;
  fs.x_hat(8) = vdp_.upsilon0;
  fs.sigma = Eigen::MatrixXd::Zero(9, 9);
  fs.sigma(7, 7) = sigma0 * sigma0;
  return fs;
}

}  // namespace magsim
