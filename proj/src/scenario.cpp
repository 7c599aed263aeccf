#include "magsim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace magsim {

namespace {

constexpr const char* kToolVersion = "magsim 1.0.0";

std::string engine_name(EngineKind e) {
  switch (e) {
    case EngineKind::Sme: return "sme";
    case EngineKind::SmeFullHilbert: return "sme-full-hilbert";
    case EngineKind::Cog: return "cog";
  }
  return "cog";
}

EngineKind engine_from(const std::string& s) {
  if (s == "sme") return EngineKind::Sme;
  if (s == "sme-full-hilbert") return EngineKind::SmeFullHilbert;
  if (s == "cog") return EngineKind::Cog;
  throw ConfigError("unknown engine: " + s);
}

std::string signal_name(SignalKind s) {
  switch (s) {
    case SignalKind::Constant: return "constant";
    case SignalKind::Ou: return "ou";
    case SignalKind::Vdp: return "vdp";
  }
  return "constant";
}

SignalKind signal_from(const std::string& s) {
  if (s == "constant") return SignalKind::Constant;
  if (s == "ou") return SignalKind::Ou;
  if (s == "vdp") return SignalKind::Vdp;
  throw ConfigError("unknown signal kind: " + s);
}

std::string estimator_name(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::None: return "none";
    case EstimatorKind::Kf: return "kf";
    case EstimatorKind::Ekf: return "ekf";
  }
  return "none";
}

EstimatorKind estimator_from(const std::string& s) {
  if (s == "none") return EstimatorKind::None;
  if (s == "kf") return EstimatorKind::Kf;
  if (s == "ekf") return EstimatorKind::Ekf;
  throw ConfigError("unknown estimator: " + s);
}

std::string controller_name(ControllerKind c) {
  switch (c) {
    case ControllerKind::None: return "none";
    case ControllerKind::Compensation: return "compensation";
    case ControllerKind::Lqr: return "lqr";
  }
  return "none";
}

ControllerKind controller_from(const std::string& s) {
  if (s == "none") return ControllerKind::None;
  if (s == "compensation") return ControllerKind::Compensation;
  if (s == "lqr") return ControllerKind::Lqr;
  throw ConfigError("unknown controller: " + s);
}

}  // namespace

void ScenarioConfig::validate() const {
  try {
    sensor.validate();
    ou.validate();
    if (signal_kind == SignalKind::Vdp) vdp.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(dt > 0.0) || !(t_final > dt)) throw ConfigError("grid: need 0 < dt < t_final");
  if (ensemble < 1) throw ConfigError("ensemble must be >= 1");
  if (sigma0 < 0.0) throw ConfigError("prior sigma0 must be >= 0");

  if (engine == EngineKind::Sme && sensor.kappa_loc != 0.0)
    throw ConfigError("engine 'sme' requires kappa_loc = 0 (symmetric subspace)");
  if (engine == EngineKind::SmeFullHilbert && sensor.n_atoms > 12)
    throw ConfigError("engine 'sme-full-hilbert' requires N <= 12");
  if (engine != EngineKind::Cog &&
      sensor.n_atoms != std::floor(sensor.n_atoms))
    throw ConfigError("density-matrix engines require integer N");

  const double r = sensor.measurement_strength + sensor.kappa_coll;
  if (r > 0.0) {
    const double scale = std::max(1.0, sensor.n_atoms * sensor.measurement_strength / r);
    const double guard = 1.0 / (10.0 * r * scale);
    if (dt >= guard) {
      std::ostringstream msg;
      msg << "dt = " << dt << " exceeds the weak-measurement guard " << guard;
      throw ConfigError(msg.str());
    }
  }
  if (estimator == EstimatorKind::Kf && signal_kind == SignalKind::Vdp)
    throw ConfigError("the linear filter has no VdP signal model; use ekf");
}

double ScenarioConfig::lambda_effective() const {
  if (lambda > 0.0) return lambda;
  return 2.0 / sensor.n_atoms;  // 1/J keeps the <Jy> term O(1) in normalized units
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j_in) {
  const nlohmann::json& j = j_in.contains("config") ? j_in.at("config") : j_in;
  ScenarioConfig c;
  try {
    c.engine = engine_from(j.value("engine", "cog"));

    const auto& s = j.at("sensor");
    c.sensor.n_atoms = s.at("n_atoms").get<double>();
    if (s.contains("probe")) {
      const auto& pr = s.at("probe");
      c.sensor.measurement_strength = measurement_strength_from_probe(
          pr.at("power_watt").get<double>(), pr.at("detuning_hz").get<double>());
    } else {
      c.sensor.measurement_strength = s.at("measurement_strength").get<double>();
    }
    c.sensor.eta = s.value("eta", 1.0);
    c.sensor.kappa_coll = s.value("kappa_coll", 0.0);
    c.sensor.kappa_loc = s.value("kappa_loc", 0.0);

    const auto& sig = j.at("signal");
    c.signal_kind = signal_from(sig.value("kind", "constant"));
    c.omega0 = sig.value("omega0", 0.0);
    if (sig.contains("ou")) {
      const auto& ou = sig.at("ou");
      c.ou.chi = ou.value("chi", 0.0);
      c.ou.q_omega = ou.value("q_omega", 0.0);
      c.ou.omega_bar = ou.value("omega_bar", 0.0);
    }
    if (sig.contains("vdp")) {
      const auto& v = sig.at("vdp");
      c.vdp.p = v.value("p", c.vdp.p);
      c.vdp.k = v.value("k", c.vdp.k);
      c.vdp.m = v.value("m", c.vdp.m);
      c.vdp.c = v.value("c", c.vdp.c);
      c.vdp.T = v.value("T", c.vdp.T);
      c.vdp.nu0 = v.value("nu0", c.vdp.nu0);
      c.vdp.omega0 = v.value("omega0", c.vdp.omega0);
      c.vdp.upsilon0 = v.value("upsilon0", c.vdp.upsilon0);
    }

    const auto& prior = j.at("prior");
    c.mu0 = prior.at("mu0").get<double>();
    c.sigma0 = prior.at("sigma0").get<double>();

    if (j.contains("estimator")) {
      const auto& e = j.at("estimator");
      c.estimator = estimator_from(e.value("kind", "none"));
      if (e.contains("ou_mismatch")) {
        c.ou_mismatch = true;
        c.ou_filter.chi = e.at("ou_mismatch").value("chi", c.ou.chi);
        c.ou_filter.q_omega = e.at("ou_mismatch").value("q_omega", c.ou.q_omega);
        c.ou_filter.omega_bar = e.at("ou_mismatch").value("omega_bar", c.ou.omega_bar);
      }
    }
    if (j.contains("controller")) {
      const auto& ctl = j.at("controller");
      c.controller = controller_from(ctl.value("kind", "none"));
      c.lambda = ctl.value("lambda", 0.0);
      c.u_max = ctl.value("u_max", 0.0);
    }

    const auto& g = j.at("grid");
    c.dt = g.at("dt").get<double>();
    c.t_final = g.at("t_final").get<double>();

    c.ensemble = j.value("ensemble", 1);
    c.seed = j.value("seed", static_cast<std::uint64_t>(0));
    c.workers = j.value("workers", 0);

    if (j.contains("output")) {
      c.out_dir = j.at("output").value("dir", "");
      c.keep_trajectories = j.at("output").value("keep_trajectories", false);
      c.record_points = j.at("output").value("record_points", 2000);
    }
    c.invariant_check_interval = j.value("invariant_check_interval", 25);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["engine"] = engine_name(engine);
  j["sensor"] = {{"n_atoms", sensor.n_atoms},
                 {"measurement_strength", sensor.measurement_strength},
                 {"eta", sensor.eta},
                 {"kappa_coll", sensor.kappa_coll},
                 {"kappa_loc", sensor.kappa_loc}};
  j["signal"] = {{"kind", signal_name(signal_kind)},
                 {"omega0", omega0},
                 {"ou", {{"chi", ou.chi}, {"q_omega", ou.q_omega}, {"omega_bar", ou.omega_bar}}},
                 {"vdp",
                  {{"p", vdp.p},
                   {"k", vdp.k},
                   {"m", vdp.m},
                   {"c", vdp.c},
                   {"T", vdp.T},
                   {"nu0", vdp.nu0},
                   {"omega0", vdp.omega0},
                   {"upsilon0", vdp.upsilon0}}}};
  j["prior"] = {{"mu0", mu0}, {"sigma0", sigma0}};
  j["estimator"] = {{"kind", estimator_name(estimator)}};
  if (ou_mismatch)
    j["estimator"]["ou_mismatch"] = {{"chi", ou_filter.chi},
                                     {"q_omega", ou_filter.q_omega},
                                     {"omega_bar", ou_filter.omega_bar}};
  j["controller"] = {{"kind", controller_name(controller)}, {"lambda", lambda}, {"u_max", u_max}};
  j["grid"] = {{"dt", dt}, {"t_final", t_final}};
  j["ensemble"] = ensemble;
  j["seed"] = seed;
  j["workers"] = workers;
  j["output"] = {{"dir", out_dir},
                 {"keep_trajectories", keep_trajectories},
                 {"record_points", record_points}};
  j["invariant_check_interval"] = invariant_check_interval;
  return j;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON error: ") + e.what());
  }
  return from_json(j);
}

double scenario_bound(double t, const ScenarioConfig& cfg) {
  BoundParams bp;
  bp.q_omega = cfg.signal_kind != SignalKind::Constant ? cfg.ou.q_omega : 0.0;
  bp.kappa_coll = cfg.sensor.kappa_coll;
  bp.kappa_loc = cfg.sensor.kappa_loc;
  bp.n_atoms = cfg.sensor.n_atoms;
  bp.sigma0 = cfg.sigma0;
  bp.chi = cfg.ou.chi;
  return cs_limit(t, bp);
}

namespace {

// Truth-engine facade shared by the trajectory loop.
struct StepOutput {
  double dy = 0.0;
  SpinMoments moments;
};

class TruthEngine {
 public:
  virtual ~TruthEngine() = default;
  virtual StepOutput step(double omega, double u, double dt, double dW) = 0;
  virtual SpinMoments initial_moments() = 0;
  virtual long clamp_count() const { return 0; }
};

class SmeTruth : public TruthEngine {
 public:
  SmeTruth(const ScenarioConfig& cfg)
      : engine_(cfg.sensor, static_cast<int>(cfg.sensor.n_atoms)),
        state_(css_x(static_cast<int>(cfg.sensor.n_atoms))),
        check_interval_(cfg.invariant_check_interval) {}

  StepOutput step(double omega, double u, double dt, double dW) override {
    StepRecord rec = engine_.step(state_, omega, u, dt, dW);
    if (check_interval_ > 0 && ++steps_ % check_interval_ == 0) engine_.check_invariants(state_);
    return {rec.dy, rec.moments};
  }

  SpinMoments initial_moments() override { return moments(state_, engine_.ops()); }

 private:
  SmeEngine engine_;
  DickeState state_;
  int check_interval_;
  long steps_ = 0;
};

class FullHilbertTruth : public TruthEngine {
 public:
  FullHilbertTruth(const ScenarioConfig& cfg)
      : engine_(cfg.sensor, static_cast<int>(cfg.sensor.n_atoms)), rho_(engine_.css_x_full()) {}

  StepOutput step(double omega, double u, double dt, double dW) override {
    StepRecord rec = engine_.step(rho_, omega, u, dt, dW);
    return {rec.dy, rec.moments};
  }

  SpinMoments initial_moments() override { return engine_.moments_full(rho_); }

 private:
  FullHilbertEngine engine_;
  Eigen::MatrixXcd rho_;
};

class CogTruth : public TruthEngine {
 public:
  CogTruth(const ScenarioConfig& cfg) : engine_(cfg.sensor, cfg.ou, cfg.vdp) {
    SignalState sig;
    sig.kind = cfg.signal_kind;
    sig.omega = cfg.omega0;
    state_ = cog_css_state(cfg.sensor.n_atoms, sig);
  }

  StepOutput step(double omega, double u, double dt, double dW) override {
    state_.signal.omega = omega;  // truth signal advances outside
    const double dy = engine_.step_spin(state_, u, dt, dW);
    StepOutput out;
    out.dy = dy;
    out.moments = to_moments(state_);
    return out;
  }

  SpinMoments initial_moments() override { return to_moments(state_); }

  long clamp_count() const override { return engine_.clamp_count(); }

 private:
  static SpinMoments to_moments(const MomentState& x) {
    SpinMoments m;
    m.mean << x.mean_jx, x.mean_jy, 0.0;
    m.cov.setZero();
    m.cov(0, 0) = x.var_x;
    m.cov(1, 1) = x.var_y;
    m.cov(2, 2) = x.var_z;
    m.cov(0, 1) = m.cov(1, 0) = x.cov_xy;
    return m;
  }

  CogEngine engine_;
  MomentState state_;
};

std::unique_ptr<TruthEngine> make_engine(const ScenarioConfig& cfg) {
  switch (cfg.engine) {
    case EngineKind::Sme: return std::make_unique<SmeTruth>(cfg);
    case EngineKind::SmeFullHilbert: return std::make_unique<FullHilbertTruth>(cfg);
    case EngineKind::Cog: return std::make_unique<CogTruth>(cfg);
  }
  throw ConfigError("unknown engine");
}

// Estimator facade: either the 2-state linear filter on the weak-field model
// or the moment-model EKF.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual void absorb(double dy, double dt, double u, double t) = 0;
  virtual double omega_hat() const = 0;
  virtual double jy_hat() const = 0;        // collective-spin units
  virtual double sigma_omega() const = 0;   // covariance of omega
  virtual double xi2_hat(double n_atoms) const { return std::nan(""); }
};

class NullEstimator : public Estimator {
 public:
  void absorb(double, double, double, double) override {}
  double omega_hat() const override { return 0.0; }
  double jy_hat() const override { return 0.0; }
  double sigma_omega() const override { return std::nan(""); }
};

class KfEstimator : public Estimator {
 public:
  KfEstimator(const ScenarioConfig& cfg) : cfg_(cfg) {
    fs_.x_hat = Eigen::Vector2d(0.0, cfg.mu0);
    fs_.sigma = Eigen::Matrix2d::Zero();
    fs_.sigma(1, 1) = cfg.sigma0 * cfg.sigma0;
  }

  void absorb(double dy, double dt, double u, double t) override {
    const LgModel m = lg_model(t, cfg_.sensor, cfg_.ou_mismatch ? cfg_.ou_filter : cfg_.ou);
    Eigen::VectorXd dyv(1), uv(1);
    dyv << dy;
    uv << u;
    fs_ = kb_correlated_step(fs_, dyv, m.ss, uv, dt);
  }

  double omega_hat() const override { return fs_.x_hat(1); }
  double jy_hat() const override { return fs_.x_hat(0); }
  double sigma_omega() const override { return fs_.sigma(1, 1); }

 private:
  ScenarioConfig cfg_;
  FilterState fs_;
};

class EkfOuEstimator : public Estimator {
 public:
  EkfOuEstimator(const ScenarioConfig& cfg)
      : model_(cfg.sensor, cfg.ou_mismatch ? cfg.ou_filter : cfg.ou),
        n_(cfg.sensor.n_atoms) {
    fs_ = model_.initial_state(cfg.mu0, cfg.sigma0);
  }

  void absorb(double dy, double dt, double u, double) override {
    fs_ = ekf_step(fs_, dy, dt, u, model_);
  }

  double omega_hat() const override { return fs_.x_hat(6); }
  double jy_hat() const override { return std::sqrt(n_) * fs_.x_hat(1); }
  double sigma_omega() const override { return fs_.sigma(6, 6); }
  double xi2_hat(double n_atoms) const override {
    const double x = fs_.x_hat(0), vy = fs_.x_hat(3);
    if (x == 0.0) return std::nan("");
    return n_atoms * vy / (x * x);
  }

 private:
  CogOuEkfModel model_;
  double n_;
  FilterState fs_;
};

class EkfVdpEstimator : public Estimator {
 public:
  EkfVdpEstimator(const ScenarioConfig& cfg)
      : model_(cfg.sensor, cfg.vdp, cfg.ou.q_omega), n_(cfg.sensor.n_atoms) {
    fs_ = model_.initial_state(cfg.mu0, cfg.sigma0);
  }

  void absorb(double dy, double dt, double u, double) override {
    fs_ = ekf_step(fs_, dy, dt, u, model_);
  }

  double omega_hat() const override { return fs_.x_hat(7); }
  double jy_hat() const override { return std::sqrt(n_) * fs_.x_hat(1); }
  double sigma_omega() const override { return fs_.sigma(7, 7); }
  double xi2_hat(double n_atoms) const override {
    const double x = fs_.x_hat(0), vy = fs_.x_hat(3);
    if (x == 0.0) return std::nan("");
    return n_atoms * vy / (x * x);
  }

 private:
  CogVdpEkfModel model_;
  double n_;
  FilterState fs_;
};

std::unique_ptr<Estimator> make_estimator(const ScenarioConfig& cfg) {
  switch (cfg.estimator) {
    case EstimatorKind::None: return std::make_unique<NullEstimator>();
    case EstimatorKind::Kf: return std::make_unique<KfEstimator>(cfg);
    case EstimatorKind::Ekf:
      if (cfg.signal_kind == SignalKind::Vdp) return std::make_unique<EkfVdpEstimator>(cfg);
      return std::make_unique<EkfOuEstimator>(cfg);
  }
  throw ConfigError("unknown estimator");
}

double control_value(const ScenarioConfig& cfg, const Estimator& est) {
  double u = 0.0;
  switch (cfg.controller) {
    case ControllerKind::None: u = 0.0; break;
    case ControllerKind::Compensation: u = field_compensation(est.omega_hat()); break;
    case ControllerKind::Lqr:
      u = lqr_control(est.omega_hat(), est.jy_hat(), cfg.lambda_effective());
      break;
  }
  if (cfg.u_max > 0.0) u = std::clamp(u, -cfg.u_max, cfg.u_max);
  return u;
}

double advance_signal(SignalState& sig, const ScenarioConfig& cfg, double dt, double g_omega) {
  switch (sig.kind) {
    case SignalKind::Constant:
      break;
    case SignalKind::Ou: {
      const OuParams& p = cfg.ou;
      if (p.chi == 0.0) {
        sig.omega += std::sqrt(p.q_omega * dt) * g_omega;
      } else {
        const double decay = std::exp(-p.chi * dt);
        const double sd = std::sqrt(p.q_omega / (2.0 * p.chi) * (1.0 - decay * decay));
        sig.omega = p.omega_bar + (sig.omega - p.omega_bar) * decay + sd * g_omega;
      }
      break;
    }
    case SignalKind::Vdp: {
      sig = vdp_step(sig, cfg.vdp, dt);
      sig.omega += std::sqrt(cfg.ou.q_omega * dt) * g_omega;  // white-field distortion
      break;
    }
  }
  return sig.omega;
}

}  // namespace

TrajectoryRecord run_trajectory(const ScenarioConfig& cfg, RngStream stream) {
  const long n_steps = static_cast<long>(std::llround(cfg.t_final / cfg.dt));
  const long stride = std::max(1L, n_steps / std::max(1, cfg.record_points));

  auto engine = make_engine(cfg);
  auto estimator = make_estimator(cfg);

  SignalState sig;
  sig.kind = cfg.signal_kind;
  sig.omega = cfg.omega0;
  if (cfg.signal_kind == SignalKind::Vdp) {
    sig.nu = cfg.vdp.nu0;
    sig.omega = cfg.vdp.omega0;
    sig.upsilon = cfg.vdp.upsilon0;
  }

  TrajectoryRecord rec;
  const long n_records = n_steps / stride + 1;
  for (auto* v : {&rec.t, &rec.omega_true, &rec.omega_hat, &rec.sigma_oo, &rec.dy, &rec.mean_jx,
                  &rec.mean_jy, &rec.mean_jz, &rec.var_x, &rec.var_y, &rec.var_z, &rec.cov_xy,
                  &rec.xi2, &rec.xi2_hat})
    v->reserve(n_records);

  const auto log_point = [&](double t, double dy, const SpinMoments& m) {
    rec.t.push_back(t);
    rec.omega_true.push_back(sig.omega);
    rec.omega_hat.push_back(estimator->omega_hat());
    rec.sigma_oo.push_back(estimator->sigma_omega());
    rec.dy.push_back(dy);
    rec.mean_jx.push_back(m.mean(0));
    rec.mean_jy.push_back(m.mean(1));
    rec.mean_jz.push_back(m.mean(2));
    rec.var_x.push_back(m.cov(0, 0));
    rec.var_y.push_back(m.cov(1, 1));
    rec.var_z.push_back(m.cov(2, 2));
    rec.cov_xy.push_back(m.cov(0, 1));
    const double jx = m.mean(0);
    rec.xi2.push_back(jx != 0.0 ? cfg.sensor.n_atoms * m.cov(1, 1) / (jx * jx) : std::nan(""));
    rec.xi2_hat.push_back(estimator->xi2_hat(cfg.sensor.n_atoms));
  };

  log_point(0.0, 0.0, engine->initial_moments());
  double u = control_value(cfg, *estimator);

  for (long k = 0; k < n_steps; ++k) {
    // fixed draw discipline: measurement noise first, field noise second,
    // so any engine/estimator combination sees identical increments
    const double dW = std::sqrt(cfg.dt) * stream.gaussian();
    const double g_omega = stream.gaussian();

    advance_signal(sig, cfg, cfg.dt, g_omega);
    StepOutput out;
    try {
      out = engine->step(sig.omega, u, cfg.dt, dW);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << e.what() << " [step " << k << ", stream " << stream.stream_id() << "]";
      throw std::runtime_error(msg.str());
    }
    estimator->absorb(out.dy, cfg.dt, u, (k + 1) * cfg.dt);
    u = control_value(cfg, *estimator);

    if ((k + 1) % stride == 0) log_point((k + 1) * cfg.dt, out.dy, out.moments);
  }
  rec.clamp_count = engine->clamp_count();
  return rec;
}

EnsembleSummary run_ensemble(const ScenarioConfig& cfg, std::vector<TrajectoryRecord>* records_out) {
  cfg.validate();
  const int nu = cfg.ensemble;
  std::vector<TrajectoryRecord> records(nu);

  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, nu));

  std::mutex fail_mutex;
  std::string failure;
  std::atomic<int> next{0};

  const auto worker = [&]() {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= nu) return;
      try {
        records[idx] = run_trajectory(cfg, RngStream(cfg.seed, static_cast<std::uint64_t>(idx)));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (failure.empty()) {
          std::ostringstream msg;
          msg << "trajectory " << idx << " (seed " << cfg.seed << ", stream " << idx
              << ") failed: " << e.what();
          failure = msg.str();
        }
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!failure.empty()) throw std::runtime_error(failure);

  // fixed-order reduction: trajectory index order, independent of workers
  const size_t n_t = records.front().t.size();
  for (const auto& r : records)
    if (r.t.size() != n_t) throw std::runtime_error("run_ensemble: inconsistent record grids");

  EnsembleSummary s;
  s.t = records.front().t;
  const double inv = 1.0 / nu;
  s.omega_true_mean.assign(n_t, 0.0);
  s.omega_hat_mean.assign(n_t, 0.0);
  s.amse.assign(n_t, 0.0);
  s.sigma_oo.assign(n_t, 0.0);
  s.xi2_cond.assign(n_t, 0.0);
  s.xi2_uncond.assign(n_t, 0.0);
  s.jx_mean.assign(n_t, 0.0);
  s.bound.resize(n_t);

  std::vector<double> jy_mean(n_t, 0.0), jy_sq(n_t, 0.0), vy_mean(n_t, 0.0);
  for (const auto& r : records) {
    for (size_t i = 0; i < n_t; ++i) {
      s.omega_true_mean[i] += r.omega_true[i];
      s.omega_hat_mean[i] += r.omega_hat[i];
      const double err = r.omega_true[i] - r.omega_hat[i];
      s.amse[i] += err * err;
      s.sigma_oo[i] += r.sigma_oo[i];
      s.xi2_cond[i] += r.xi2[i];
      s.jx_mean[i] += r.mean_jx[i];
      jy_mean[i] += r.mean_jy[i];
      jy_sq[i] += r.mean_jy[i] * r.mean_jy[i];
      vy_mean[i] += r.var_y[i];
    }
    s.clamp_count += r.clamp_count;
  }
  for (size_t i = 0; i < n_t; ++i) {
    s.omega_true_mean[i] *= inv;
    s.omega_hat_mean[i] *= inv;
    s.amse[i] *= inv;
    s.sigma_oo[i] *= inv;
    s.xi2_cond[i] *= inv;
    s.jx_mean[i] *= inv;
    jy_mean[i] *= inv;
    jy_sq[i] *= inv;
    vy_mean[i] *= inv;
    // unconditional variance by the exact decomposition
    // Var_unc(Jy) = E[Vy_c] + Var(<Jy>_c)
    const double var_of_mean = std::max(0.0, jy_sq[i] - jy_mean[i] * jy_mean[i]);
    const double vy_unc = vy_mean[i] + var_of_mean;
    const double jx = s.jx_mean[i];
    s.xi2_uncond[i] = jx != 0.0 ? cfg.sensor.n_atoms * vy_unc / (jx * jx) : std::nan("");
    s.bound[i] = scenario_bound(s.t[i], cfg);
  }

  if (records_out) *records_out = std::move(records);
  return s;
}

namespace {

void write_ensemble_csv(const EnsembleSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,omega_true,omega_hat,amse,sigma_oo,xi2_cond,xi2_uncond,jx_mean\n";
  for (size_t i = 0; i < s.t.size(); ++i)
    out << s.t[i] << ',' << s.omega_true_mean[i] << ',' << s.omega_hat_mean[i] << ',' << s.amse[i]
        << ',' << s.sigma_oo[i] << ',' << s.xi2_cond[i] << ',' << s.xi2_uncond[i] << ','
        << s.jx_mean[i] << '\n';
}

void write_trajectory_csv(const TrajectoryRecord& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,dy,mean_jx,mean_jy,mean_jz,var_x,var_y,var_z,cov_xy,xi2,"
         "omega_true,omega_hat,sigma_omega_omega,xi2_hat\n";
  for (size_t i = 0; i < r.t.size(); ++i)
    out << r.t[i] << ',' << r.dy[i] << ',' << r.mean_jx[i] << ',' << r.mean_jy[i] << ','
        << r.mean_jz[i] << ',' << r.var_x[i] << ',' << r.var_y[i] << ',' << r.var_z[i] << ','
        << r.cov_xy[i] << ',' << r.xi2[i] << ',' << r.omega_true[i] << ',' << r.omega_hat[i]
        << ',' << r.sigma_oo[i] << ',' << r.xi2_hat[i] << '\n';
}

void write_bound_csv(const EnsembleSummary& s, const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  BoundParams bp;
  bp.q_omega = cfg.signal_kind != SignalKind::Constant ? cfg.ou.q_omega : 0.0;
  bp.kappa_coll = cfg.sensor.kappa_coll;
  bp.kappa_loc = cfg.sensor.kappa_loc;
  bp.n_atoms = cfg.sensor.n_atoms;
  bp.sigma0 = cfg.sigma0;
  bp.chi = cfg.ou.chi;
  const bool degenerate = cs_limit_is_degenerate(bp);
  out << "t,v_cs,sqrt_v_cs,static_regime,degenerate\n";
  for (double t : s.t) {
    const double v = cs_limit(t, bp);
    out << t << ',' << v << ',' << std::sqrt(v) << ',' << (bp.q_omega == 0.0 ? 1 : 0) << ','
        << (degenerate ? 1 : 0) << '\n';
  }
}

}  // namespace

void emit_outputs(const EnsembleSummary& summary, const ScenarioConfig& cfg,
                  const std::vector<TrajectoryRecord>* records) {
  namespace fs = std::filesystem;
  if (cfg.out_dir.empty()) throw ConfigError("output.dir is not set");
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);

  write_ensemble_csv(summary, (dir / "ensemble.csv").string());
  write_bound_csv(summary, cfg, (dir / "bounds.csv").string());

  nlohmann::json manifest;
  manifest["tool"] = kToolVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest");
  mf << manifest.dump(2) << '\n';

  if (cfg.keep_trajectories && records) {
    for (size_t i = 0; i < records->size(); ++i) {
      std::ostringstream name;
      name << "trajectory_" << i << ".csv";
      write_trajectory_csv((*records)[i], (dir / name.str()).string());
    }
  }
}

}  // namespace magsim
