#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace magsim {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 -> auto
  double min_step_factor = 1e-15;
  long max_steps = 50'000'000L;
};

/// Adaptive Cash-Karp RK4(5) integration of dx/dt = rhs(t, x) from t0 to t1.
/// Steps shrink through stiff transients and grow on quasi-steady stretches,
/// which is what the Riccati equations here need (fast rates ~ N M against
/// horizons ~ 1/M).
template <typename Rhs>
Eigen::VectorXd integrate_ode(Rhs&& rhs, Eigen::VectorXd x, double t0, double t1,
                              const OdeOptions& opt = {}) {
  static const double a[] = {0.0, 0.2, 0.3, 0.6, 1.0, 0.875};
  static const double b21 = 0.2;
  static const double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
  static const double b41 = 0.3, b42 = -0.9, b43 = 1.2;
  static const double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
  static const double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                      b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
  static const double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                      c6 = 512.0 / 1771.0;
  static const double d1 = c1 - 2825.0 / 27648.0, d3 = c3 - 18575.0 / 48384.0,
                      d4 = c4 - 13525.0 / 55296.0, d5 = -277.0 / 14336.0, d6 = c6 - 0.25;

  if (t1 == t0) return x;
  if (t1 < t0) throw std::invalid_argument("integrate_ode: t1 < t0");

  double t = t0;
  double h = opt.initial_step > 0.0 ? opt.initial_step : (t1 - t0) * 1e-6;
  const double hmin = (t1 - t0) * opt.min_step_factor;
  long steps = 0;

  while (t < t1) {
    if (++steps > opt.max_steps) throw std::runtime_error("integrate_ode: step budget exceeded");
    if (t + h > t1) h = t1 - t;

    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + a[1] * h, x + h * (b21 * k1));
    const Eigen::VectorXd k3 = rhs(t + a[2] * h, x + h * (b31 * k1 + b32 * k2));
    const Eigen::VectorXd k4 = rhs(t + a[3] * h, x + h * (b41 * k1 + b42 * k2 + b43 * k3));
    const Eigen::VectorXd k5 = rhs(t + a[4] * h, x + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
    const Eigen::VectorXd k6 =
        rhs(t + a[5] * h, x + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));

    const Eigen::VectorXd x5 = x + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
    const Eigen::VectorXd err = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6);

    double ratio = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double scale = opt.atol + opt.rtol * std::max(std::abs(x[i]), std::abs(x5[i]));
      ratio = std::max(ratio, std::abs(err[i]) / scale);
    }

    if (ratio <= 1.0 || h <= hmin) {
      t += h;
      x = x5;
      if (!x.allFinite()) throw std::runtime_error("integrate_ode: non-finite state");
      const double grow = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
      h *= std::min(5.0, std::max(0.2, grow));
    } else {
      h *= std::max(0.1, 0.9 * std::pow(ratio, -0.25));
      if (h < hmin) h = hmin;
    }
  }
  return x;
}

}  // namespace magsim
