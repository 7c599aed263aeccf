#include "magsim/sme.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace magsim {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

Eigen::MatrixXcd superop_D(const Eigen::MatrixXcd& L, const Eigen::MatrixXcd& rho) {
  if (L.rows() != L.cols() || L.rows() != rho.rows() || rho.rows() != rho.cols())
    throw std::invalid_argument("superop_D: dimension mismatch");
  const Eigen::MatrixXcd LdL = L.adjoint() * L;
  return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

Eigen::MatrixXcd superop_H(const Eigen::MatrixXcd& L, const Eigen::MatrixXcd& rho) {
  if (L.rows() != L.cols() || L.rows() != rho.rows() || rho.rows() != rho.cols())
    throw std::invalid_argument("superop_H: dimension mismatch");
  const std::complex<double> mean = ((L + L.adjoint()) * rho).trace();
  return L * rho + rho * L.adjoint() - mean * rho;
}

SmeEngine::SmeEngine(const SensorParams& params, int n_atoms)
    : params_(params), ops_(build_collective_operators(n_atoms)) {
  params_.validate();
  if (params_.kappa_loc != 0.0)
    throw std::invalid_argument(
        "SmeEngine: kappa_loc must be 0 on the symmetric subspace; use FullHilbertEngine");
  jy2_ = ops_.jy * ops_.jy;
  jz2_ = ops_.jz * ops_.jz;
}

StepRecord SmeEngine::step(DickeState& state, double omega, double u, double dt, double dW) const {
  const double M = params_.measurement_strength;
  const double eta = params_.eta;
  const double kc = params_.kappa_coll;

  const double jy_mean = (state.rho * ops_.jy).trace().real();
  const double dy_r = 2.0 * std::sqrt(eta * M) * jy_mean * dt + dW;

  const int dim = ops_.dim();
  Eigen::MatrixXcd m0 = Eigen::MatrixXcd::Identity(dim, dim);
  m0 -= dt * (kI * (omega + u) * ops_.jz + 0.5 * (M * jy2_ + kc * jz2_));
  m0 += (std::sqrt(eta * M) * dy_r) * ops_.jy;
  m0 += (0.5 * eta * M * (dy_r * dy_r - dt)) * jy2_;

  Eigen::MatrixXcd next = m0 * state.rho * m0.adjoint();
  if (eta < 1.0) next += ((1.0 - eta) * M * dt) * (ops_.jy * state.rho * ops_.jy);
  if (kc > 0.0) next += (kc * dt) * (ops_.jz * state.rho * ops_.jz);

  const double tr = next.trace().real();
  if (!(tr > 0.0) || !next.allFinite()) {
    std::ostringstream msg;
    msg << "SmeEngine::step: invalid state after update (trace = " << tr << ")";
    throw std::runtime_error(msg.str());
  }
  state.rho = next / tr;

  StepRecord rec;
  rec.dW = dW;
  rec.dy = 2.0 * eta * std::sqrt(M) * jy_mean * dt + std::sqrt(eta) * dW;
  rec.moments = moments(state, ops_);
  return rec;
}

void SmeEngine::check_invariants(const DickeState& state) const {
  const double te = state.trace_error();
  const double he = state.hermiticity_error();
  const double me = state.min_eigenvalue();
  if (te > trace_tol || he > herm_tol || me < -positivity_tol) {
    std::ostringstream msg;
    msg << "SmeEngine: state invariant violated: |tr-1| = " << te << ", herm = " << he
        << ", min eig = " << me;
    throw std::runtime_error(msg.str());
  }
}

FullHilbertEngine::FullHilbertEngine(const SensorParams& params, int n_atoms)
    : params_(params), n_(n_atoms) {
  params_.validate();
  if (n_atoms < 1 || n_atoms > 12)
    throw std::invalid_argument("FullHilbertEngine: N must be in [1, 12]");
  const int dim = 1 << n_;
  jz_diag_.resize(dim);
  for (int a = 0; a < dim; ++a) {
    // bit = 1 means spin down; Jz eigenvalue (N - 2 * popcount)/2
    jz_diag_(a) = 0.5 * (n_ - 2 * std::popcount(static_cast<unsigned>(a)));
  }
}

Eigen::MatrixXcd FullHilbertEngine::apply_jz_left(const Eigen::MatrixXcd& a) const {
  return jz_diag_.asDiagonal() * a;
}

Eigen::MatrixXcd FullHilbertEngine::apply_jy_left(const Eigen::MatrixXcd& a) const {
  const int dim = 1 << n_;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  // Jy = sum_j sigma_y^(j)/2 with sigma_y |0> = i|1>, sigma_y |1> = -i|0>
  for (int j = 0; j < n_; ++j) {
    const int mask = 1 << j;
    for (int r = 0; r < dim; ++r) {
      const int src = r ^ mask;
      const std::complex<double> coef = (r & mask) ? kI : -kI;  // <r| sigma_y |src>
      out.row(r) += 0.5 * coef * a.row(src);
    }
  }
  return out;
}

Eigen::MatrixXcd FullHilbertEngine::css_x_full() const {
  const int dim = 1 << n_;
  Eigen::VectorXcd psi(dim);
  const double amp = std::pow(std::sqrt(0.5), n_);
  for (int a = 0; a < dim; ++a) psi(a) = amp;  // (|0> + |1>)/sqrt(2) per atom
  return psi * psi.adjoint();
}

SpinMoments FullHilbertEngine::moments_full(const Eigen::MatrixXcd& rho) const {
  SpinMoments out;
  out.trace_deviation = std::abs(rho.trace() - std::complex<double>(1.0));

  const Eigen::MatrixXcd jy_rho = apply_jy_left(rho);
  const Eigen::MatrixXcd jz_rho = apply_jz_left(rho);
  // Jx column action via sigma_x |b> = |b^1>
  const int dim = 1 << n_;
  Eigen::MatrixXcd jx_rho = Eigen::MatrixXcd::Zero(dim, dim);
  for (int j = 0; j < n_; ++j) {
    const int mask = 1 << j;
    for (int r = 0; r < dim; ++r) jx_rho.row(r) += 0.5 * rho.row(r ^ mask);
  }

  out.mean(0) = jx_rho.trace().real();
  out.mean(1) = jy_rho.trace().real();
  out.mean(2) = jz_rho.trace().real();

  const Eigen::MatrixXcd ops[3] = {jx_rho, jy_rho, jz_rho};
  // second moments <Ja Jb> from tr(Ja Jb rho): reuse Ja(Jb rho)
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      Eigen::MatrixXcd inner;
      if (a == 0) {
        inner = Eigen::MatrixXcd::Zero(dim, dim);
        for (int j = 0; j < n_; ++j) {
          const int mask = 1 << j;
          for (int r = 0; r < dim; ++r) inner.row(r) += 0.5 * ops[b].row(r ^ mask);
        }
      } else if (a == 1) {
        inner = apply_jy_left(ops[b]);
      } else {
        inner = apply_jz_left(ops[b]);
      }
      const double m_ab = inner.trace().real();
      // symmetrized: tr(Ja Jb rho) real part equals (1/2)<{Ja,Jb}> for Hermitian rho
      out.cov(a, b) = out.cov(b, a) = m_ab - out.mean(a) * out.mean(b);
    }
  }
  return out;
}

StepRecord FullHilbertEngine::step(Eigen::MatrixXcd& rho, double omega, double u, double dt,
                                   double dW) const {
  const double M = params_.measurement_strength;
  const double eta = params_.eta;
  const double kc = params_.kappa_coll;
  const double kl = params_.kappa_loc;
  const int dim = 1 << n_;

  const double jy_mean = apply_jy_left(rho).trace().real();
  const double dy_r = 2.0 * std::sqrt(eta * M) * jy_mean * dt + dW;

  // M0 = I - (i(omega+u) Jz + (M Jy^2 + kc Jz^2 + kl N/2)/2) dt
  //      + sqrt(eta M) Jy dy_r + (eta M / 2) Jy^2 (dy_r^2 - dt)
  Eigen::MatrixXcd m0 = Eigen::MatrixXcd::Identity(dim, dim);
  m0 -= dt * kI * (omega + u) * Eigen::MatrixXcd(jz_diag_.asDiagonal());
  {
    Eigen::MatrixXcd jy1 = apply_jy_left(Eigen::MatrixXcd::Identity(dim, dim));
    Eigen::MatrixXcd jy2 = apply_jy_left(jy1);
    Eigen::MatrixXcd jz2 = (jz_diag_.array().square().matrix()).asDiagonal();
    m0 -= 0.5 * dt * (M * jy2 + kc * jz2);
    m0 -= Eigen::MatrixXcd((0.5 * dt * kl * 0.5 * n_) *
                           Eigen::VectorXcd::Ones(dim).asDiagonal());  // sigma_z^2 = I per atom
    m0 += (std::sqrt(eta * M) * dy_r) * jy1;
    m0 += (0.5 * eta * M * (dy_r * dy_r - dt)) * jy2;
  }

  Eigen::MatrixXcd next = m0 * rho * m0.adjoint();
  if (eta < 1.0) {
    const Eigen::MatrixXcd jy_rho = apply_jy_left(rho);
    next += ((1.0 - eta) * M * dt) * apply_jy_left(jy_rho.adjoint()).adjoint();
  }
  if (kc > 0.0)
    next += (kc * dt) * (jz_diag_.asDiagonal() * rho * jz_diag_.asDiagonal());
  if (kl > 0.0) {
    // (kl/2) sum_j sigma_z^(j) rho sigma_z^(j): elementwise sign products,
    // sum_j s_j(a) s_j(b) = N - 2 popcount(a ^ b)
    Eigen::MatrixXcd local = rho;
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        local(r, c) *= n_ - 2.0 * std::popcount(static_cast<unsigned>(r ^ c));
    next += (0.5 * kl * dt) * local;
  }

  const double tr = next.trace().real();
  if (!(tr > 0.0) || !next.allFinite())
    throw std::runtime_error("FullHilbertEngine::step: invalid state after update");
  rho = next / tr;

  StepRecord rec;
  rec.dW = dW;
  rec.dy = 2.0 * eta * std::sqrt(M) * jy_mean * dt + std::sqrt(eta) * dW;
  rec.moments = moments_full(rho);
  return rec;
}

std::vector<SpinMoments> unconditional_average(
    const std::vector<std::vector<SpinMoments>>& trajectories) {
  if (trajectories.size() < 2)
    throw std::invalid_argument("unconditional_average: need at least 2 trajectories");
  const size_t steps = trajectories.front().size();
  for (const auto& t : trajectories)
    if (t.size() != steps)
      throw std::invalid_argument("unconditional_average: inconsistent time grids");

  std::vector<SpinMoments> avg(steps);
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  for (size_t k = 0; k < steps; ++k) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& t : trajectories) {
      mean += t[k].mean;
      cov += t[k].cov;
    }
    avg[k].mean = mean * inv;
    avg[k].cov = cov * inv;
  }
  return avg;
}

std::vector<DickeState> unconditional_average_states(
    const std::vector<std::vector<DickeState>>& trajectories) {
  if (trajectories.size() < 2)
    throw std::invalid_argument("unconditional_average_states: need at least 2 trajectories");
  const size_t steps = trajectories.front().size();
  for (const auto& t : trajectories)
    if (t.size() != steps)
      throw std::invalid_argument("unconditional_average_states: inconsistent time grids");

  std::vector<DickeState> avg(steps);
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  for (size_t k = 0; k < steps; ++k) {
    avg[k].n_atoms = trajectories.front()[k].n_atoms;
    avg[k].rho = trajectories.front()[k].rho;
    for (size_t t = 1; t < trajectories.size(); ++t) avg[k].rho += trajectories[t][k].rho;
    avg[k].rho *= inv;
  }
  return avg;
}

}  // namespace magsim
