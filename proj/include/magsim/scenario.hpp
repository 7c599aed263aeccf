#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "magsim/bounds.hpp"
#include "magsim/cog.hpp"
#include "magsim/control.hpp"
#include "magsim/filters.hpp"
#include "magsim/rng.hpp"
#include "magsim/signals.hpp"
#include "magsim/sme.hpp"

#include <nlohmann/json_fwd.hpp>

namespace magsim {

/// Configuration faults map to CLI exit code 2; numerical faults
/// (std::runtime_error and friends) map to exit code 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EngineKind { Sme, SmeFullHilbert, Cog };
enum class EstimatorKind { None, Kf, Ekf };
enum class ControllerKind { None, Compensation, Lqr };

struct ScenarioConfig {
  EngineKind engine = EngineKind::Cog;
  SensorParams sensor;

  SignalKind signal_kind = SignalKind::Constant;
  double omega0 = 0.0;  // true initial Larmor frequency [rad/s]
  OuParams ou;          // OU truth parameters; q_omega doubles as the VdP distortion strength
  VdpParams vdp;

  double mu0 = 0.0;     // prior mean
  double sigma0 = 1.0;  // prior standard deviation

  EstimatorKind estimator = EstimatorKind::None;
  bool ou_mismatch = false;
  OuParams ou_filter;  // used when ou_mismatch is set

  ControllerKind controller = ControllerKind::None;
  double lambda = 0.0;   // <Jy> feedback knob; <= 0 requests the 1/J default
  double u_max = 0.0;    // 0 disables saturation

  double dt = 0.0;
  double t_final = 0.0;

  int ensemble = 1;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 -> hardware concurrency

  std::string out_dir;
  bool keep_trajectories = false;
  int record_points = 2000;          // stored samples per trajectory (thinning)
  int invariant_check_interval = 25; // SME positivity spot-check cadence

  void validate() const;
  double lambda_effective() const;  // default lambda = 1/J when unset

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ScenarioConfig load(const std::string& path);
};

/// Per-trajectory log on the (thinned) record grid.
struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<double> omega_true, omega_hat, sigma_oo;
  std::vector<double> dy;
  std::vector<double> mean_jx, mean_jy, mean_jz;
  std::vector<double> var_x, var_y, var_z, cov_xy;
  std::vector<double> xi2, xi2_hat;
  long clamp_count = 0;
};

struct EnsembleSummary {
  std::vector<double> t;
  std::vector<double> omega_true_mean, omega_hat_mean;
  std::vector<double> amse;        // mean squared estimation error of omega
  std::vector<double> sigma_oo;    // mean filter covariance
  std::vector<double> xi2_cond;    // mean conditional squeezing
  std::vector<double> xi2_uncond;  // squeezing of the record-averaged state
  std::vector<double> jx_mean;
  std::vector<double> bound;       // variance bound overlay
  long clamp_count = 0;
};

TrajectoryRecord run_trajectory(const ScenarioConfig& cfg, RngStream stream);

EnsembleSummary run_ensemble(const ScenarioConfig& cfg,
                             std::vector<TrajectoryRecord>* records_out = nullptr);

/// Writes ensemble CSV, optional per-trajectory CSVs, the run manifest and
/// the bound-curve CSV into cfg.out_dir.
void emit_outputs(const EnsembleSummary& summary, const ScenarioConfig& cfg,
                  const std::vector<TrajectoryRecord>* records = nullptr);

/// Variance bound curve matching the scenario's signal/noise model.
double scenario_bound(double t, const ScenarioConfig& cfg);

}  // namespace magsim
