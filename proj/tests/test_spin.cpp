#include <doctest.h>

#include <cmath>
#include <complex>

#include "magsim/rng.hpp"
#include "magsim/spin.hpp"

using namespace magsim;
using Complex = std::complex<double>;

TEST_CASE("Jz is diag(1/2, -1/2) for a single atom") {
  const auto ops = build_collective_operators(1);
  CHECK(ops.jz(0, 0).real() == doctest::Approx(0.5));
  CHECK(ops.jz(1, 1).real() == doctest::Approx(-0.5));
  CHECK(std::abs(ops.jz(0, 1)) == 0.0);
  CHECK_THROWS_AS(build_collective_operators(0), std::invalid_argument);
}

TEST_CASE("angular momentum commutators and Casimir") {
  for (const int n : {2, 7, 40, 300}) {
    const auto ops = build_collective_operators(n);
    const Complex i(0.0, 1.0);
    const auto comm_err = [&](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                              const Eigen::MatrixXcd& c) {
      return (a * b - b * a - i * c).cwiseAbs().maxCoeff();
    };
    CHECK(comm_err(ops.jx, ops.jy, ops.jz) < 1e-12 * n);
    CHECK(comm_err(ops.jy, ops.jz, ops.jx) < 1e-12 * n);
    CHECK(comm_err(ops.jz, ops.jx, ops.jy) < 1e-12 * n);

    const double j = 0.5 * n;
    const Eigen::MatrixXcd j2 = ops.jx * ops.jx + ops.jy * ops.jy + ops.jz * ops.jz;
    const Eigen::MatrixXcd expected =
        j * (j + 1.0) * Eigen::MatrixXcd::Identity(n + 1, n + 1);
    CHECK((j2 - expected).cwiseAbs().maxCoeff() < 1e-9 * n);
  }
}

TEST_CASE("css_x moments and purity") {
  for (const int n : {1, 2, 10, 75, 300}) {
    const auto ops = build_collective_operators(n);
    const auto state = css_x(n);
    const auto m = moments(state, ops);
    CHECK(m.mean(0) == doctest::Approx(0.5 * n).epsilon(1e-12));
    CHECK(std::abs(m.mean(1)) < 1e-10 * n);
    CHECK(std::abs(m.mean(2)) < 1e-10 * n);
    CHECK(std::abs(m.cov(0, 0)) < 1e-9 * n);
    CHECK(m.cov(1, 1) == doctest::Approx(0.25 * n).epsilon(1e-10));
    CHECK(m.cov(2, 2) == doctest::Approx(0.25 * n).epsilon(1e-10));
    CHECK(std::abs(m.cov(0, 1)) < 1e-9 * n);

    const double purity = (state.rho * state.rho).trace().real();
    CHECK(purity == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("moments of the maximally mixed and ground states") {
  const int n = 6;
  const auto ops = build_collective_operators(n);

  DickeState mixed;
  mixed.n_atoms = n;
  mixed.rho = Eigen::MatrixXcd::Identity(n + 1, n + 1) / (n + 1.0);
  const auto m = moments(mixed, ops);
  CHECK(std::abs(m.mean(0)) < 1e-12);
  CHECK(std::abs(m.mean(1)) < 1e-12);
  CHECK(std::abs(m.mean(2)) < 1e-12);

  DickeState ground;  // |j, -j><j, -j| lives in the last basis slot
  ground.n_atoms = n;
  ground.rho = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  ground.rho(n, n) = 1.0;
  CHECK(moments(ground, ops).mean(2) == doctest::Approx(-0.5 * n));
}

TEST_CASE("moments flags a trace deviation above 1e-6") {
  const int n = 4;
  const auto ops = build_collective_operators(n);
  auto state = css_x(n);
  state.rho *= 1.1;
  CHECK(moments(state, ops).trace_deviation > 1e-6);
  CHECK(moments(css_x(n), ops).trace_deviation < 1e-12);
}

TEST_CASE("squeezing parameter") {
  const int n = 24;
  SUBCASE("CSS gives exactly 1") {
    for (const int nn : {2, 9, 100, 301}) {
      CHECK(squeezing_wineland(0.25 * nn, 0.5 * nn, nn) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  SUBCASE("halved variance halves xi^2") {
    CHECK(squeezing_wineland(0.125 * n, 0.5 * n, n) == doctest::Approx(0.5));
  }
  SUBCASE("zero mean spin is rejected") {
    CHECK_THROWS_AS(squeezing_wineland(1.0, 0.0, n), std::invalid_argument);
  }
  SUBCASE("two-regime long-time prediction") {
    // xi^2 with v_perp = (J/2) sqrt(kc/(eta M)) e^{-rt/2} and mean J e^{-rt/2}
    // collapses to sqrt(kc/(eta M)) e^{+rt/2}
    const double j = 0.5 * n, kc = 0.01, m_str = 2.0, eta = 1.0, t = 0.3;
    const double r = m_str + kc;
    const double v_perp = 0.5 * j * std::sqrt(kc / (eta * m_str)) * std::exp(-0.5 * r * t);
    const double mean = j * std::exp(-0.5 * r * t);
    CHECK(squeezing_wineland(v_perp, mean, n) ==
          doctest::Approx(std::sqrt(kc / (eta * m_str)) * std::exp(0.5 * r * t)).epsilon(1e-12));
  }
}

TEST_CASE("clebsch_gordan basics") {
  CHECK(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(clebsch_gordan(0.5, 0.5, 0.5, 0.5, 1.0, 1.0) == doctest::Approx(1.0));
  // selection rules
  CHECK(clebsch_gordan(1.0, 0.0, 1.0, 0.0, 2.0, 1.0) == 0.0);  // q != m1 + m2
  CHECK(clebsch_gordan(1.0, 1.0, 1.0, 0.0, 5.0, 1.0) == 0.0);  // triangle violated
  // <1 0; 1 0 | 2 0> = sqrt(2/3)
  CHECK(clebsch_gordan(1.0, 0.0, 1.0, 0.0, 2.0, 0.0) == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("clebsch_gordan column orthonormality at random (j1, j2)") {
  RngStream rng(2024, 0);
  for (int trial = 0; trial < 12; ++trial) {
    const int tj1 = 1 + static_cast<int>(rng.uniform() * 12);  // 2*j1
    const int tj2 = 1 + static_cast<int>(rng.uniform() * 12);
    const double j1 = 0.5 * tj1, j2 = 0.5 * tj2;
    // pick two (k, q) pairs and check sum_{m1,m2} c c' = delta
    for (int rep = 0; rep < 3; ++rep) {
      const int tk_min = std::abs(tj1 - tj2), tk_max = tj1 + tj2;
      const int tk = tk_min + 2 * static_cast<int>(rng.uniform() * ((tk_max - tk_min) / 2 + 1));
      const int tkp = tk_min + 2 * static_cast<int>(rng.uniform() * ((tk_max - tk_min) / 2 + 1));
      const int tq = -tk + 2 * static_cast<int>(rng.uniform() * (tk + 1));
      double acc = 0.0, acc_prime = 0.0;
      for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2)
        for (int tm2 = -tj2; tm2 <= tj2; tm2 += 2) {
          const double c = clebsch_gordan(j1, tm1 / 2.0, j2, tm2 / 2.0, tk / 2.0, tq / 2.0);
          acc += c * c;
          acc_prime +=
              c * clebsch_gordan(j1, tm1 / 2.0, j2, tm2 / 2.0, tkp / 2.0, tq / 2.0);
        }
      if (std::abs(tq) <= tk) CHECK(acc == doctest::Approx(1.0).epsilon(1e-11));
      if (tkp != tk) CHECK(std::abs(acc_prime) < 1e-11);
    }
  }
}

TEST_CASE("spherical harmonics match known closed forms") {
  const double theta = 0.83, phi = 2.1;
  CHECK(spherical_harmonic(0, 0, theta, phi).real() ==
        doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)));
  CHECK(spherical_harmonic(1, 0, theta, phi).real() ==
        doctest::Approx(std::sqrt(3.0 / (4.0 * M_PI)) * std::cos(theta)));
  const Complex y11 = spherical_harmonic(1, 1, theta, phi);
  const Complex expected = -std::sqrt(3.0 / (8.0 * M_PI)) * std::sin(theta) *
                           std::exp(Complex(0.0, phi));
  CHECK(std::abs(y11 - expected) < 1e-14);
  // conjugation relation
  const Complex y2m1 = spherical_harmonic(2, -1, theta, phi);
  const Complex y21 = spherical_harmonic(2, 1, theta, phi);
  CHECK(std::abs(y2m1 - (-std::conj(y21))) < 1e-14);
}

TEST_CASE("wigner field of a Hermitian state is real") {
  const int n = 12;
  auto state = css_x(n);
  // mix in a rotated component to break symmetry while staying Hermitian
  Eigen::MatrixXcd bump = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  bump(2, 5) = Complex(0.03, 0.01);
  state.rho = 0.9 * state.rho + 0.1 * (bump + bump.adjoint()) +
              0.1 * Eigen::MatrixXcd::Identity(n + 1, n + 1) / (n + 1.0);
  state.rho /= state.rho.trace();

  const auto field = wigner_sphere(state, default_wigner_grid(n + 1, 2 * n + 3));
  CHECK(field.max_imag_residual < 1e-10);
}

TEST_CASE("wigner field of css_x peaks at theta = pi/2, phi = 0") {
  const int n = 20;
  // grid containing (pi/2, 0) exactly: odd theta count puts a GL node at 0
  auto grid = default_wigner_grid(31, 64);
  const auto field = wigner_sphere(css_x(n), grid);

  int best_t = -1, best_p = -1;
  double best = -1e30;
  for (int it = 0; it < field.values.rows(); ++it)
    for (int ip = 0; ip < field.values.cols(); ++ip)
      if (field.values(it, ip) > best) {
        best = field.values(it, ip);
        best_t = it;
        best_p = ip;
      }
  CHECK(std::abs(grid.theta[best_t] - 0.5 * M_PI) < 1e-9);
  CHECK(grid.phi[best_p] == 0.0);
  CHECK(best > 0.0);
}

TEST_CASE("wigner round trip: quadrature recovers rho_kq") {
  const int n = 10;
  auto state = css_x(n);
  // make the state generic but Hermitian and unit-trace
  RngStream rng(5, 0);
  Eigen::MatrixXcd noise(n + 1, n + 1);
  for (int r = 0; r <= n; ++r)
    for (int c = 0; c <= n; ++c) noise(r, c) = Complex(rng.gaussian(), rng.gaussian());
  Eigen::MatrixXcd h = noise + noise.adjoint();
  state.rho = 0.7 * state.rho + 0.3 * (h * h.adjoint());
  state.rho /= state.rho.trace();

  // band limit N requires >= N+1 GL nodes and > 2N phi samples
  const auto grid = default_wigner_grid(n + 1, 2 * n + 2);
  const auto field = wigner_sphere(state, grid);
  const auto direct = wigner_rho_kq(state);

  const double prefac = std::sqrt((n + 1.0) / (4.0 * M_PI));
  double worst = 0.0;
  for (int k = 0; k <= n; ++k) {
    for (int q = -k; q <= k; ++q) {
      Complex acc = 0.0;
      for (size_t it = 0; it < grid.theta.size(); ++it) {
        for (size_t ip = 0; ip < grid.phi.size(); ++ip) {
          const Complex y = spherical_harmonic(k, q, grid.theta[it], grid.phi[ip]);
          acc += grid.theta_weight[it] * (2.0 * M_PI / grid.phi.size()) *
                 field.values(static_cast<int>(it), static_cast<int>(ip)) * std::conj(y);
        }
      }
      worst = std::max(worst, std::abs(acc / prefac - direct(k, q + n)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gauss-legendre grid integrates polynomials exactly") {
  const auto grid = default_wigner_grid(8, 4);
  // integral of cos^2(theta) over the sphere measure in cos(theta): 2/3
  double acc = 0.0;
  for (size_t i = 0; i < grid.theta.size(); ++i)
    acc += grid.theta_weight[i] * std::pow(std::cos(grid.theta[i]), 2);
  CHECK(acc == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  CHECK_THROWS_AS(default_wigner_grid(0, 4), std::invalid_argument);
}
