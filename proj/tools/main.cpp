#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "magsim/bounds.hpp"
#include "magsim/scenario.hpp"
#include "magsim/sme.hpp"
#include "magsim/spin.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, std::int64_t seed,
            int workers, bool keep_trajectories) {
  magsim::ScenarioConfig cfg = magsim::ScenarioConfig::load(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (workers > 0) cfg.workers = workers;
  if (keep_trajectories) cfg.keep_trajectories = true;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";

  std::vector<magsim::TrajectoryRecord> records;
  magsim::EnsembleSummary summary = magsim::run_ensemble(cfg, &records);
  magsim::emit_outputs(summary, cfg, &records);

  std::cout << "wrote " << cfg.out_dir << "/ensemble.csv (" << summary.t.size() << " rows, "
            << cfg.ensemble << " trajectories)\n";
  if (summary.clamp_count > 0)
    std::cout << "warning: " << summary.clamp_count << " variance clamps; consider a smaller dt\n";
  return 0;
}

int cmd_bounds(const std::string& config_path, const std::string& out_dir) {
  magsim::ScenarioConfig cfg = magsim::ScenarioConfig::load(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  std::filesystem::create_directories(cfg.out_dir);

  magsim::BoundParams bp;
  bp.q_omega = cfg.signal_kind != magsim::SignalKind::Constant ? cfg.ou.q_omega : 0.0;
  bp.kappa_coll = cfg.sensor.kappa_coll;
  bp.kappa_loc = cfg.sensor.kappa_loc;
  bp.n_atoms = cfg.sensor.n_atoms;
  bp.sigma0 = cfg.sigma0;
  bp.chi = cfg.ou.chi;

  const std::string path = cfg.out_dir + "/bounds.csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,v_cs,sqrt_v_cs,static_regime,degenerate\n";
  const long n = static_cast<long>(cfg.t_final / cfg.dt);
  const long stride = std::max(1L, n / std::max(1, cfg.record_points));
  for (long k = 0; k <= n; k += stride) {
    const double t = k * cfg.dt;
    const double v = magsim::cs_limit(t, bp);
    out << t << ',' << v << ',' << std::sqrt(v) << ','
        << (bp.q_omega == 0.0 ? 1 : 0) << ',' << (magsim::cs_limit_is_degenerate(bp) ? 1 : 0)
        << '\n';
  }
  std::cout << "wrote " << path << '\n';
  return 0;
}

bool report(const char* name, bool ok) {
  std::cout << (ok ? "PASS  " : "FAIL  ") << name << '\n';
  return ok;
}

int cmd_validate(std::uint64_t seed) {
  using namespace magsim;
  bool all = true;

  {
    const auto ops = build_collective_operators(100);
    const Eigen::MatrixXcd comm = ops.jx * ops.jy - ops.jy * ops.jx -
                                  std::complex<double>(0, 1) * ops.jz;
    all &= report("collective operators: [Jx,Jy] = i Jz", comm.cwiseAbs().maxCoeff() < 1e-12);

    const auto state = css_x(100);
    const auto m = moments(state, ops);
    const bool css_ok = std::abs(m.mean(0) - 50.0) < 1e-10 && std::abs(m.mean(1)) < 1e-10 &&
                        std::abs(m.cov(1, 1) - 25.0) < 1e-10;
    all &= report("CSS moments (N/2, 0, 0), variances (0, N/4, N/4)", css_ok);
  }

  {
    double worst = 0.0;
    for (int twice_k = 0; twice_k <= 8; ++twice_k) {
      for (int twice_kp = twice_k % 2 ? 1 : 0; twice_kp <= 8; twice_kp += 2) {
        // orthonormality over m1, m2 at fixed (j1, j2) = (2, 2)
        for (int q2 = -twice_k; q2 <= twice_k; q2 += 2) {
          double acc = 0.0;
          for (int m1_2 = -4; m1_2 <= 4; m1_2 += 2)
            for (int m2_2 = -4; m2_2 <= 4; m2_2 += 2)
              acc += clebsch_gordan(2, m1_2 / 2.0, 2, m2_2 / 2.0, twice_k / 2.0, q2 / 2.0) *
                     clebsch_gordan(2, m1_2 / 2.0, 2, m2_2 / 2.0, twice_kp / 2.0, q2 / 2.0);
          const double expected = (twice_k == twice_kp && std::abs(q2) <= twice_k) ? 1.0 : 0.0;
          if (twice_k >= std::abs(q2)) worst = std::max(worst, std::abs(acc - expected));
        }
      }
    }
    all &= report("Clebsch-Gordan column orthonormality", worst < 1e-12);
  }

  {
    SensorParams p;
    p.n_atoms = 20;
    p.measurement_strength = 0.05;
    p.kappa_coll = 0.005;
    p.eta = 1.0;
    SmeEngine engine(p, 20);
    DickeState state = css_x(20);
    RngStream rng(seed, 0);
    bool ok = true;
    try {
      for (int k = 0; k < 200; ++k) {
        engine.step(state, 1.0, 0.0, 1e-3, std::sqrt(1e-3) * rng.gaussian());
        engine.check_invariants(state);
      }
    } catch (const std::exception&) {
      ok = false;
    }
    all &= report("SME invariants over 200 steps (N = 20)", ok);
  }

  {
    ScenarioConfig cfg;
    cfg.engine = EngineKind::Cog;
    cfg.sensor.n_atoms = 1e6;
    cfg.sensor.measurement_strength = 1e-5;
    cfg.sensor.kappa_loc = 1.0;
    cfg.signal_kind = SignalKind::Ou;
    cfg.ou.chi = 0.1;
    cfg.ou.q_omega = 10.0;
    cfg.omega0 = 1.0;
    cfg.mu0 = 1.0;
    cfg.sigma0 = 1.0;
    cfg.estimator = EstimatorKind::Ekf;
    cfg.controller = ControllerKind::Lqr;
    cfg.dt = 1e-4;
    cfg.t_final = 0.05;
    cfg.ensemble = 4;
    cfg.seed = seed;
    cfg.workers = 1;
    auto a = run_ensemble(cfg);
    cfg.workers = 4;
    auto b = run_ensemble(cfg);
    bool identical = a.t.size() == b.t.size();
    for (size_t i = 0; identical && i < a.t.size(); ++i)
      identical = a.amse[i] == b.amse[i] && a.xi2_cond[i] == b.xi2_cond[i];
    all &= report("ensemble determinism across worker counts", identical);
  }

  std::cout << (all ? "validate: all checks passed\n" : "validate: FAILURES\n");
  return all ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuously monitored atomic magnetometer toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::int64_t seed = -1;
  int workers = 0;
  bool keep_trajectories = false;

  auto* run = app.add_subcommand("run", "run a closed-loop scenario ensemble");
  run->add_option("--config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override master seed");
  run->add_option("--workers", workers, "worker threads (0 = auto)");
  run->add_flag("--keep-trajectories", keep_trajectories, "write per-trajectory CSVs");

  auto* bounds = app.add_subcommand("bounds", "emit precision-bound curves as CSV");
  bounds->add_option("--config", config_path, "scenario config (JSON)")->required();
  bounds->add_option("--out", out_dir, "output directory");

  std::uint64_t validate_seed = 20260314;
  auto* validate = app.add_subcommand("validate", "run the built-in invariant suite");
  validate->add_option("--seed", validate_seed, "seed for the stochastic checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, workers, keep_trajectories);
    if (bounds->parsed()) return cmd_bounds(config_path, out_dir);
    if (validate->parsed()) return cmd_validate(validate_seed);
  } catch (const magsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
