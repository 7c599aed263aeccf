#include <doctest.h>

#include <cmath>
#include <vector>

#include "magsim/rng.hpp"
#include "magsim/sde.hpp"
#include "magsim/signals.hpp"
#include "magsim/statespace.hpp"

using namespace magsim;

TEST_CASE("wiener increments have zero mean and variance dt") {
  RngStream rng(42, 0);
  const double dt = 0.01;
  const int n = 1'000'000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dw = wiener_increment(rng, dt);
    sum += dw;
    sum_sq += dw * dw;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / n));
  CHECK(var == doctest::Approx(dt).epsilon(0.01));
}

TEST_CASE("wiener increment scales as sqrt(dt) for a fixed deviate") {
  // two streams with the same seed produce the same normal sequence
  RngStream a(7, 3), b(7, 3);
  const double large = wiener_increment(a, 1.0);
  const double small = wiener_increment(b, 1e-12);
  CHECK(small == doctest::Approx(large * 1e-6));
  CHECK_THROWS_AS(wiener_increment(a, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(wiener_increment(a, -1.0), std::invalid_argument);
}

TEST_CASE("euler_maruyama_step identities") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 2.5);
  const auto zero_drift = [](const Eigen::VectorXd& v) { return Eigen::VectorXd::Zero(v.size()); };
  const auto zero_diff = [](const Eigen::VectorXd& v) {
    return Eigen::MatrixXd::Zero(v.size(), 1);
  };
  const Eigen::VectorXd dw = Eigen::VectorXd::Constant(1, 0.3);
  CHECK((euler_maruyama_step(x, zero_drift, zero_diff, 0.1, dw) - x).norm() == 0.0);

  // dX = 2 dt with x = 0, dt = 0.5 -> 1
  const double out = euler_maruyama_step(0.0, [](double) { return 2.0; },
                                         [](double) { return 0.0; }, 0.5, 0.0);
  CHECK(out == doctest::Approx(1.0));
}

TEST_CASE("euler_maruyama_step rejects non-finite dynamics") {
  CHECK_THROWS_AS(euler_maruyama_step(1.0, [](double) { return std::nan(""); },
                                      [](double) { return 0.0; }, 0.1, 0.0),
                  std::runtime_error);
}

TEST_CASE("geometric Brownian motion ensemble mean matches the closed form") {
  // oracle: X(t) = X(0) exp((mu - s^2/2) t + s W) has E[X(t)] = X(0) e^{mu t}
  const double mu = 0.7, sigma = 0.5, t_final = 1.0, x0 = 1.0;
  const int n_paths = 100'000, n_steps = 100;
  const double dt = t_final / n_steps;

  double sum = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    RngStream rng(123, static_cast<std::uint64_t>(p));
    double x = x0;
    for (int k = 0; k < n_steps; ++k) {
      x = euler_maruyama_step(x, [&](double v) { return mu * v; },
                              [&](double v) { return sigma * v; }, dt,
                              wiener_increment(rng, dt));
    }
    sum += x;
  }
  const double mc_mean = sum / n_paths;
  const double expected = x0 * std::exp(mu * t_final);
  // MC error ~ std/sqrt(n); std of GBM here ~ e^{mu}sqrt(e^{s^2}-1) ~ 1.1
  CHECK(mc_mean == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("euler-maruyama converges strongly with order 1/2") {
  // fixed Brownian path refinement on GBM against its pathwise closed form
  const double mu = 0.6, sigma = 0.4, t_final = 1.0;
  const int n_paths = 150;
  const int fine = 512;

  double err_coarse = 0.0, err_fine = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    RngStream rng(77, static_cast<std::uint64_t>(p));
    std::vector<double> dw(fine);
    double w_total = 0.0;
    for (int i = 0; i < fine; ++i) {
      dw[i] = wiener_increment(rng, t_final / fine);
      w_total += dw[i];
    }
    const double exact = std::exp((mu - 0.5 * sigma * sigma) * t_final + sigma * w_total);

    const auto run = [&](int factor) {
      const int steps = fine / factor;
      const double dt = t_final / steps;
      double x = 1.0;
      for (int k = 0; k < steps; ++k) {
        double dwk = 0.0;
        for (int j = 0; j < factor; ++j) dwk += dw[k * factor + j];
        x = euler_maruyama_step(x, [&](double v) { return mu * v; },
                                [&](double v) { return sigma * v; }, dt, dwk);
      }
      return x;
    };
    err_coarse += std::abs(run(4) - exact);
    err_fine += std::abs(run(2) - exact);
  }
  const double ratio = err_coarse / err_fine;  // expect ~ sqrt(2)
  CHECK(ratio > 1.2);
  CHECK(ratio < 1.7);
}

TEST_CASE("ou_step: chi = 0, q = 0 leaves omega unchanged") {
  RngStream rng(1, 0);
  OuParams p;  // all zeros
  CHECK(ou_step(3.14, p, 0.1, rng) == 3.14);
}

TEST_CASE("ou_step ensemble mean and variance match the transition density") {
  OuParams p;
  p.chi = 2.0;
  p.q_omega = 3.0;
  p.omega_bar = 0.0;
  const double x0 = 1.5, t_final = 0.7;
  const int n_paths = 200'000, n_steps = 7;
  const double dt = t_final / n_steps;

  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    RngStream rng(99, static_cast<std::uint64_t>(i));
    double x = x0;
    for (int k = 0; k < n_steps; ++k) x = ou_step(x, p, dt, rng);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n_paths;
  const double var = sum_sq / n_paths - mean * mean;
  const double expected_mean = x0 * std::exp(-p.chi * t_final);
  const double expected_var = p.q_omega / (2.0 * p.chi) * (1.0 - std::exp(-2.0 * p.chi * t_final));
  CHECK(mean == doctest::Approx(expected_mean).epsilon(0.03));
  CHECK(var == doctest::Approx(expected_var).epsilon(0.02));

  // small-chi regime: variance ~ q t
  OuParams small;
  small.chi = 1e-4;
  small.q_omega = 3.0;
  const double v_small = small.q_omega / (2.0 * small.chi) *
                         (1.0 - std::exp(-2.0 * small.chi * t_final));
  CHECK(v_small == doctest::Approx(small.q_omega * t_final).epsilon(1e-3));
}

TEST_CASE("ou stationary variance reaches q/(2 chi)") {
  OuParams p;
  p.chi = 5.0;
  p.q_omega = 2.0;
  const double dt = 0.05;
  const int burn = 200, samples = 400'000;
  RngStream rng(31415, 0);
  double x = 0.0;
  for (int k = 0; k < burn; ++k) x = ou_step(x, p, dt, rng);
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < samples; ++k) {
    x = ou_step(x, p, dt, rng);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / samples;
  const double var = sum_sq / samples - mean * mean;
  CHECK(var == doctest::Approx(p.q_omega / (2.0 * p.chi)).epsilon(0.03));
}

TEST_CASE("vdp_step: origin is a fixed point") {
  SignalState s;
  s.kind = SignalKind::Vdp;
  VdpParams vp;
  const SignalState out = vdp_step(s, vp, 1e-3);
  CHECK(out.nu == 0.0);
  CHECK(out.omega == 0.0);
  CHECK(out.upsilon == 0.0);
}

TEST_CASE("vdp_step: negative nu drives upsilon up") {
  SignalState s;
  s.kind = SignalKind::Vdp;
  s.nu = -0.2;
  VdpParams vp;
  const SignalState out = vdp_step(s, vp, 1e-4);
  // (|nu| - nu)/2T = -nu/T > 0 dominates the -upsilon/T leak at upsilon = 0
  CHECK(out.upsilon > 0.0);
  CHECK(out.upsilon == doctest::Approx((-s.nu / vp.T) * 1e-4));
}

TEST_CASE("vdp trajectory is periodic with period near 20 ms") {
  SignalState s;
  s.kind = SignalKind::Vdp;
  VdpParams vp;  // defaults carry the heartbeat parameter set
  s.nu = vp.nu0;
  s.omega = vp.omega0;
  s.upsilon = vp.upsilon0;

  const double dt = 1e-6;
  const double t_max = 0.2;
  std::vector<double> upward_crossings;
  double prev = s.omega;
  for (long k = 1; k * dt < t_max; ++k) {
    s = vdp_step(s, vp, dt);
    if (prev < 0.2 && s.omega >= 0.2) upward_crossings.push_back(k * dt);
    prev = s.omega;
  }
  REQUIRE(upward_crossings.size() >= 4);
  // skip the initial transient; average later cycle lengths
  double period = 0.0;
  int count = 0;
  for (size_t i = 2; i < upward_crossings.size(); ++i) {
    period += upward_crossings[i] - upward_crossings[i - 1];
    ++count;
  }
  period /= count;
  CHECK(period == doctest::Approx(0.020).epsilon(0.15));
}

TEST_CASE("vdp_step rejects bad inputs") {
  SignalState s;
  s.kind = SignalKind::Vdp;
  VdpParams vp;
  CHECK_THROWS_AS(vdp_step(s, vp, 0.0), std::invalid_argument);
  s.kind = SignalKind::Ou;
  CHECK_THROWS_AS(vdp_step(s, vp, 1e-3), std::invalid_argument);
}

TEST_CASE("lg_discretize first-order map") {
  const auto I2 = Eigen::MatrixXd::Identity(2, 2);

  SUBCASE("F = 0 gives A = I") {
    const auto d = lg_discretize(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), I2,
                                 Eigen::MatrixXd::Ones(1, 2), I2, Eigen::MatrixXd::Ones(1, 1), 0.37);
    CHECK((d.A - I2).norm() == 0.0);
  }

  SUBCASE("scalar F = f gives A = 1 + f dt") {
    const double f = -2.0, dt = 0.01;
    const auto d = lg_discretize(Eigen::MatrixXd::Constant(1, 1, f), Eigen::MatrixXd::Zero(1, 1),
                                 Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1),
                                 Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1),
                                 dt);
    CHECK(d.A(0, 0) == doctest::Approx(1.0 + f * dt));
  }

  SUBCASE("Q scalar 1 at dt = 1e-3 gives Q_k = 1e3") {
    const auto d = lg_discretize(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1),
                                 Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1),
                                 Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1),
                                 1e-3);
    CHECK(d.Q(0, 0) == doctest::Approx(1e3));
    CHECK(d.R(0, 0) == doctest::Approx(1e3));
    CHECK(d.H(0, 0) == 1.0);
  }

  SUBCASE("dimension mismatch rejected") {
    CHECK_THROWS_AS(lg_discretize(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(1, 1),
                                  Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(1, 2),
                                  Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(1, 1),
                                  0.1),
                    std::invalid_argument);
  }
}

TEST_CASE("identical (seed, stream) reproduces identical sequences; streams decorrelate") {
  RngStream a(1234, 5), b(1234, 5), c(1234, 6);
  bool identical = true;
  double corr = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const double xa = a.gaussian(), xb = b.gaussian(), xc = c.gaussian();
    identical = identical && (xa == xb);
    corr += xa * xc;
  }
  CHECK(identical);
  CHECK(std::abs(corr / 10'000) < 0.05);
}
