#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace magsim {

/// Collective angular-momentum operators on the symmetric (Dicke) subspace
/// j = N/2 of N spin-1/2 particles, dimension N+1.
///
/// Basis ordering is fixed as m = +j, +j-1, ..., -j (row/column 0 is m = +j).
/// Ladder matrix elements follow J±|j,m> = sqrt(j(j+1) - m(m±1)) |j,m±1>;
/// Jx = (J+ + J-)/2, Jy = (J+ - J-)/(2i), Jz diagonal with m.
struct CollectiveOps {
  int n_atoms = 0;
  Eigen::MatrixXcd jx, jy, jz, jplus, jminus;

  double j() const { return 0.5 * n_atoms; }
  int dim() const { return n_atoms + 1; }
};

CollectiveOps build_collective_operators(int n_atoms);

/// Conditional state on the symmetric subspace: an (N+1)x(N+1) density matrix.
struct DickeState {
  int n_atoms = 0;
  Eigen::MatrixXcd rho;

  double trace_error() const;       // |tr(rho) - 1|
  double hermiticity_error() const; // max |rho - rho^dagger|
  double min_eigenvalue() const;
};

/// Coherent spin state along +x as a density matrix: amplitudes
/// 2^{-N/2} binom(N, N/2+m)^{1/2} on |N/2, m>.
DickeState css_x(int n_atoms);

/// First and symmetrized second central moments of (Jx, Jy, Jz).
struct SpinMoments {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double trace_deviation = 0.0;  // |tr(rho)-1| observed; > 1e-6 flags a bad state
};

SpinMoments moments(const DickeState& state, const CollectiveOps& ops);

/// Wineland squeezing parameter xi^2 = N v_perp / mean_s^2.
/// mean_s = 0 leaves the parameter undefined and is rejected.
double squeezing_wineland(double v_perp, double mean_s, double n_atoms);

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | k q> by the explicit
/// factorial-sum (Racah) formula with cached log-factorials. Zero unless
/// q = m1 + m2 and |j1-j2| <= k <= j1+j2. Arguments are (half-)integers.
double clebsch_gordan(double j1, double m1, double j2, double m2, double k, double q);

/// Angular grid for the spherical Wigner function: Gauss-Legendre nodes in
/// cos(theta) crossed with a uniform phi grid. The weights make the
/// spherical-harmonic quadrature exact up to the grid's band limit.
struct WignerGrid {
  std::vector<double> theta;         // polar nodes, acos of GL nodes
  std::vector<double> theta_weight;  // GL weights (in cos theta)
  std::vector<double> phi;           // uniform in [0, 2pi)
};

WignerGrid default_wigner_grid(int n_theta, int n_phi);

/// Spherical Wigner quasiprobability field W(theta, phi); real for Hermitian input.
struct WignerField {
  WignerGrid grid;
  Eigen::MatrixXd values;         // n_theta x n_phi
  double max_imag_residual = 0.0; // largest discarded imaginary part over the grid
};

WignerField wigner_sphere(const DickeState& state, const WignerGrid& grid);

/// Expansion coefficients rho_kq = sum_{m1,m2} rho_{m1 m2} t_kq^{m1 m2} of the
/// state in the spherical-harmonic basis; row k, column index q + k.
Eigen::MatrixXcd wigner_rho_kq(const DickeState& state);

/// Orthonormal complex spherical harmonic Y_k^q(theta, phi)
/// (Condon-Shortley convention).
std::complex<double> spherical_harmonic(int k, int q, double theta, double phi);

/// theta,phi,value CSV (radians, dimensionless value).
void write_wigner_csv(const WignerField& field, const std::string& path);

}  // namespace magsim
