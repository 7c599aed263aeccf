#include "magsim/spin.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace magsim {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

// log n! cache, grown on demand (single-threaded setup paths только use it
// during operator construction; Wigner evaluation precomputes upfront).
double log_factorial(int n) {
  static std::vector<double> cache{0.0, 0.0};
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument");
  while (static_cast<int>(cache.size()) <= n)
    cache.push_back(cache.back() + std::log(static_cast<double>(cache.size())));
  return cache[n];
}

// Round a (half-)integer quantum number doubled to an exact int.
int doubled(double x) {
  const double two = 2.0 * x;
  const int r = static_cast<int>(std::lround(two));
  if (std::abs(two - r) > 1e-9)
    throw std::invalid_argument("quantum number is not a half-integer");
  return r;
}

}  // namespace

CollectiveOps build_collective_operators(int n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("build_collective_operators: N must be >= 1");
  const int dim = n_atoms + 1;
  const double j = 0.5 * n_atoms;

  CollectiveOps ops;
  ops.n_atoms = n_atoms;
  ops.jplus = Eigen::MatrixXcd::Zero(dim, dim);
  ops.jminus = Eigen::MatrixXcd::Zero(dim, dim);
  ops.jz = Eigen::MatrixXcd::Zero(dim, dim);

  // index i holds m = j - i
  for (int i = 0; i < dim; ++i) {
    const double m = j - i;
    ops.jz(i, i) = m;
    if (i > 0) ops.jplus(i - 1, i) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    if (i < dim - 1) ops.jminus(i + 1, i) = std::sqrt(j * (j + 1.0) - m * (m - 1.0));
  }
  ops.jx = 0.5 * (ops.jplus + ops.jminus);
  ops.jy = -0.5 * kI * (ops.jplus - ops.jminus);
  return ops;
}

double DickeState::trace_error() const { return std::abs(rho.trace() - std::complex<double>(1.0)); }

double DickeState::hermiticity_error() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double DickeState::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho + rho.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DickeState css_x(int n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("css_x: N must be >= 1");
  const int dim = n_atoms + 1;
  Eigen::VectorXcd psi(dim);
  // amplitude on |j, m>, index i = j - m, so N/2 + m = N - i
  const double log_norm = -0.5 * n_atoms * std::log(2.0);
  for (int i = 0; i < dim; ++i) {
    const int k = n_atoms - i;
    const double log_amp =
        log_norm + 0.5 * (log_factorial(n_atoms) - log_factorial(k) - log_factorial(n_atoms - k));
    psi(i) = std::exp(log_amp);
  }
  DickeState s;
  s.n_atoms = n_atoms;
  s.rho = psi * psi.adjoint();
  return s;
}

SpinMoments moments(const DickeState& state, const CollectiveOps& ops) {
  if (state.rho.rows() != ops.dim() || state.rho.cols() != ops.dim())
    throw std::invalid_argument("moments: state/operator dimension mismatch");

  SpinMoments out;
  out.trace_deviation = state.trace_error();

  const Eigen::MatrixXcd* J[3] = {&ops.jx, &ops.jy, &ops.jz};
  for (int a = 0; a < 3; ++a) out.mean(a) = (state.rho * (*J[a])).trace().real();
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      const double sym = 0.5 * ((state.rho * (*J[a]) * (*J[b])).trace().real() +
                                (state.rho * (*J[b]) * (*J[a])).trace().real());
      out.cov(a, b) = out.cov(b, a) = sym - out.mean(a) * out.mean(b);
    }
  return out;
}

double squeezing_wineland(double v_perp, double mean_s, double n_atoms) {
  if (mean_s == 0.0)
    throw std::invalid_argument("squeezing_wineland: undefined for zero mean spin");
  return n_atoms * v_perp / (mean_s * mean_s);
}

double clebsch_gordan(double j1, double m1, double j2, double m2, double k, double q) {
  const int tj1 = doubled(j1), tm1 = doubled(m1), tj2 = doubled(j2), tm2 = doubled(m2),
            tk = doubled(k), tq = doubled(q);
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tq) > tk) return 0.0;
  if (tm1 + tm2 != tq) return 0.0;
  if (tk < std::abs(tj1 - tj2) || tk > tj1 + tj2) return 0.0;
  // integer perimeter requirement (j1 + j2 + k integral)
  if ((tj1 + tj2 + tk) % 2 != 0) return 0.0;

  // all factorial arguments below are integers when the inputs are valid
  const auto f = [](int twice) {
    if (twice % 2 != 0) throw std::logic_error("clebsch_gordan: non-integer factorial argument");
    return twice / 2;
  };

  const int a1 = f(tj1 + tj2 - tk);
  const int a2 = f(tj1 - tj2 + tk);
  const int a3 = f(-tj1 + tj2 + tk);
  const int a4 = f(tj1 + tj2 + tk) + 1;
  const double log_delta =
      0.5 * (log_factorial(a1) + log_factorial(a2) + log_factorial(a3) - log_factorial(a4));

  const double log_pref =
      0.5 * (std::log(tk + 1.0) + log_factorial(f(tk + tq)) + log_factorial(f(tk - tq)) +
             log_factorial(f(tj1 - tm1)) + log_factorial(f(tj1 + tm1)) +
             log_factorial(f(tj2 - tm2)) + log_factorial(f(tj2 + tm2)));

  const int s_min = std::max({0, f(tj2 - tk - tm1), f(tj1 - tk + tm2)});
  const int s_max = std::min({f(tj1 + tj2 - tk), f(tj1 - tm1), f(tj2 + tm2)});

  long double sum = 0.0L;
  for (int s = s_min; s <= s_max; ++s) {
    const double log_term = log_factorial(f(tj1 + tj2 - tk) - s) + log_factorial(f(tj1 - tm1) - s) +
                            log_factorial(f(tj2 + tm2) - s) + log_factorial(s) +
                            log_factorial(f(tk - tj2 + tm1) + s) +
                            log_factorial(f(tk - tj1 - tm2) + s);
    const long double term = std::exp(static_cast<long double>(log_delta + log_pref - log_term));
    sum += (s % 2 == 0) ? term : -term;
  }
  return static_cast<double>(sum);
}

WignerGrid default_wigner_grid(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw std::invalid_argument("default_wigner_grid: empty grid");
  WignerGrid g;
  g.theta.resize(n_theta);
  g.theta_weight.resize(n_theta);
  g.phi.resize(n_phi);

  // Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
  const int n = n_theta;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int l = 0; l < n; ++l) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * l + 1.0) * x * p1 - l * p2) / (l + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    g.theta[i] = std::acos(x);
    g.theta[n - 1 - i] = std::acos(-x);
    g.theta_weight[i] = w;
    g.theta_weight[n - 1 - i] = w;
  }
  for (int i = 0; i < n_phi; ++i) g.phi[i] = 2.0 * M_PI * i / n_phi;
  return g;
}

namespace {

// Fully normalized associated Legendre P-bar_k^q(theta) for q >= 0, such that
// Y_k^q = (-1)^q P-bar_k^q e^{i q phi}. Column-stable three-term recursion;
// the 1/sqrt(4 pi) normalization is included.
void normalized_legendre_column(int k_max, int q, double theta, std::vector<double>& out) {
  out.assign(k_max + 1, 0.0);
  const double s = std::sin(theta), c = std::cos(theta);
  double pqq = 1.0 / std::sqrt(4.0 * M_PI);
  for (int m = 1; m <= q; ++m) pqq *= s * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
  if (q <= k_max) out[q] = pqq;
  if (q + 1 <= k_max) out[q + 1] = std::sqrt(2.0 * q + 3.0) * c * pqq;
  for (int k = q + 2; k <= k_max; ++k) {
    const double a = std::sqrt((4.0 * k * k - 1.0) / (static_cast<double>(k) * k - q * q));
    const double b =
        std::sqrt(((k - 1.0) * (k - 1.0) - q * q) / (4.0 * (k - 1.0) * (k - 1.0) - 1.0));
    out[k] = a * (c * out[k - 1] - b * out[k - 2]);
  }
}

}  // namespace

std::complex<double> spherical_harmonic(int k, int q, double theta, double phi) {
  if (std::abs(q) > k) return 0.0;
  const int aq = std::abs(q);
  std::vector<double> col;
  normalized_legendre_column(k, aq, theta, col);
  const double pbar = col[k];
  std::complex<double> y = std::pow(-1.0, aq) * pbar *
                           std::exp(kI * static_cast<double>(aq) * phi);
  if (q < 0) y = std::pow(-1.0, aq) * std::conj(y);
  return y;
}

Eigen::MatrixXcd wigner_rho_kq(const DickeState& state) {
  const int n = state.n_atoms;
  const double j = 0.5 * n;
  Eigen::MatrixXcd rkq = Eigen::MatrixXcd::Zero(n + 1, 2 * n + 1);
  // t_kq^{m1 m2} = (-1)^{J - m1 - q} <J m1; J -m2 | k q>, nonzero only for q = m1 - m2
  for (int k = 0; k <= n; ++k) {
    for (int q = -k; q <= k; ++q) {
      std::complex<double> acc = 0.0;
      for (int i1 = 0; i1 <= n; ++i1) {
        const double m1 = j - i1;
        const double m2 = m1 - q;
        if (m2 < -j - 1e-9 || m2 > j + 1e-9) continue;
        const int i2 = static_cast<int>(std::lround(j - m2));
        const double cg = clebsch_gordan(j, m1, j, -m2, k, q);
        if (cg == 0.0) continue;
        // J - m1 - q = i1 - q is an integer by the q = m1 - m2 selection rule
        const double phase = (((i1 - q) % 2 + 2) % 2 == 0) ? 1.0 : -1.0;
        acc += phase * cg * state.rho(i1, i2);
      }
      rkq(k, q + n) = acc;
    }
  }
  return rkq;
}

WignerField wigner_sphere(const DickeState& state, const WignerGrid& grid) {
  if (grid.theta.empty() || grid.phi.empty())
    throw std::invalid_argument("wigner_sphere: empty grid");
  const int n = state.n_atoms;
  const int nt = static_cast<int>(grid.theta.size());
  const int np = static_cast<int>(grid.phi.size());
  const double prefac = std::sqrt((n + 1.0) / (4.0 * M_PI));

  const Eigen::MatrixXcd rkq = wigner_rho_kq(state);

  WignerField field;
  field.grid = grid;
  field.values = Eigen::MatrixXd::Zero(nt, np);

  std::vector<double> col;
  for (int it = 0; it < nt; ++it) {
    const double theta = grid.theta[it];
    // A_q(theta) = sum_k rho_kq * (Y_k^q without the e^{iq phi} factor)
    std::vector<std::complex<double>> aq(2 * n + 1, 0.0);
    for (int q = -n; q <= n; ++q) {
      const int absq = std::abs(q);
      normalized_legendre_column(n, absq, theta, col);
      std::complex<double> acc = 0.0;
      for (int k = absq; k <= n; ++k) {
        double y_base = std::pow(-1.0, absq) * col[k];
        if (q < 0 && (absq % 2 != 0)) y_base = -y_base;  // Y_k^{-q} = (-1)^q conj(Y_k^q)
        acc += rkq(k, q + n) * y_base;
      }
      aq[q + n] = acc;
    }
    for (int ip = 0; ip < np; ++ip) {
      const double phi = grid.phi[ip];
      std::complex<double> w = 0.0;
      for (int q = -n; q <= n; ++q)
        w += aq[q + n] * std::exp(kI * static_cast<double>(q) * phi);
      field.values(it, ip) = prefac * w.real();
      field.max_imag_residual = std::max(field.max_imag_residual, std::abs(prefac * w.imag()));
    }
  }
  return field;
}

void write_wigner_csv(const WignerField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_wigner_csv: cannot open " + path);
  out << "theta,phi,value\n";
  out.precision(17);
  for (size_t it = 0; it < field.grid.theta.size(); ++it)
    for (size_t ip = 0; ip < field.grid.phi.size(); ++ip)
      out << field.grid.theta[it] << ',' << field.grid.phi[ip] << ','
          << field.values(static_cast<int>(it), static_cast<int>(ip)) << '\n';
}

}  // namespace magsim
