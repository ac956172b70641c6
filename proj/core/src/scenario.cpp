#include "rpebo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rpebo/errors.hpp"

namespace rpebo {

using nlohmann::json;

std::string observer_name(ObserverKind k) {
  switch (k) {
    case ObserverKind::kGradient: return "gradient";
    case ObserverKind::kPebo: return "pebo";
    case ObserverKind::kPvDrem: return "pv_drem";
    case ObserverKind::kNavigation: return "navigation";
  }
  return "unknown";
}

DriveMode ScenarioConfig::drive_mode() const {
  switch (trajectory_kind) {
    case TrajectoryKind::kPe:
    case TrajectoryKind::kIeVelocity:
      return DriveMode::kVelocity;
    case TrajectoryKind::kIeAcceleration:
      return DriveMode::kAcceleration;
    case TrajectoryKind::kTabulated:
      return tabulated_mode;
  }
  return DriveMode::kVelocity;
}

Trajectory ScenarioConfig::make_trajectory() const {
  Trajectory tr = [&] {
    switch (trajectory_kind) {
      case TrajectoryKind::kPe: return Trajectory::pe();
      case TrajectoryKind::kIeVelocity: return Trajectory::ie_velocity();
      case TrajectoryKind::kIeAcceleration: return Trajectory::ie_acceleration();
      case TrajectoryKind::kTabulated:
        return Trajectory::tabulated(tabulated_mode, tabulated_rows,
                                     x0_override.value_or(Vec3::Zero()),
                                     v0_override.value_or(Vec3::Zero()));
    }
    return Trajectory::pe();
  }();
  return tr;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

const std::map<std::string, ObserverKind> kObserverNames = {
    {"gradient", ObserverKind::kGradient},
    {"pebo", ObserverKind::kPebo},
    {"pv_drem", ObserverKind::kPvDrem},
    {"navigation", ObserverKind::kNavigation},
};

const std::map<std::string, TrajectoryKind> kTrajectoryNames = {
    {"pe", TrajectoryKind::kPe},
    {"ie_velocity", TrajectoryKind::kIeVelocity},
    {"ie_acceleration", TrajectoryKind::kIeAcceleration},
    {"tabulated", TrajectoryKind::kTabulated},
};

const std::set<std::string>& allowed_gains(ObserverKind k) {
  static const std::set<std::string> grad = {"alpha", "gamma", "rhat0", "xi0"};
  static const std::set<std::string> pebo = {"alpha",  "gamma", "kp_mix",       "zeta0",
                                             "theta0", "xi0",   "gradient_flow"};
  static const std::set<std::string> pv = {"alpha", "gamma", "rho", "kp"};
  static const std::set<std::string> nav = {"alpha", "gamma", "rho",
                                            "kp",    "k_att", "sigma_pos"};
  switch (k) {
    case ObserverKind::kGradient: return grad;
    case ObserverKind::kPebo: return pebo;
    case ObserverKind::kPvDrem: return pv;
    case ObserverKind::kNavigation: return nav;
  }
  return grad;
}

bool get_double(const json& j, const std::string& key, double& out,
                std::vector<std::string>& errs) {
  if (!j.contains(key)) return false;
  if (!j[key].is_number()) {
    errs.push_back("field '" + key + "' must be a number");
    return false;
  }
  out = j[key].get<double>();
  return true;
}

bool parse_vec3(const json& v, Vec3& out) {
  if (!v.is_array() || v.size() != 3) return false;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) return false;
    out(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return true;
}

}  // namespace

bool gain_allowed(ObserverKind k, const std::string& key) {
  return allowed_gains(k).count(key) > 0;
}

ScenarioConfig load_scenario(const std::string& json_text) {
  std::vector<std::string> errs;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("JSON parse error: ") + e.what()});
  }
  if (!j.is_object()) {
    throw ConfigError({"top-level JSON value must be an object"});
  }

  ScenarioConfig cfg;
  if (j.contains("name")) {
    if (j["name"].is_string()) {
      cfg.name = j["name"].get<std::string>();
    } else {
      errs.push_back("field 'name' must be a string");
    }
  }

  if (!j.contains("observer") || !j["observer"].is_string()) {
    errs.push_back("field 'observer' (string) is required");
  } else {
    const auto it = kObserverNames.find(j["observer"].get<std::string>());
    if (it == kObserverNames.end()) {
      errs.push_back("unknown observer '" + j["observer"].get<std::string>() +
                     "' (expected gradient|pebo|pv_drem|navigation)");
    } else {
      cfg.observer = it->second;
    }
  }

  if (!j.contains("trajectory") || !j["trajectory"].is_object() ||
      !j["trajectory"].contains("kind") || !j["trajectory"]["kind"].is_string()) {
    errs.push_back("field 'trajectory.kind' (string) is required");
  } else {
    const auto& tj = j["trajectory"];
    const auto it = kTrajectoryNames.find(tj["kind"].get<std::string>());
    if (it == kTrajectoryNames.end()) {
      errs.push_back("unknown trajectory kind '" + tj["kind"].get<std::string>() + "'");
    } else {
      cfg.trajectory_kind = it->second;
    }
    if (cfg.trajectory_kind == TrajectoryKind::kTabulated) {
      const std::string mode = tj.value("mode", "");
      if (mode == "velocity") {
        cfg.tabulated_mode = DriveMode::kVelocity;
      } else if (mode == "acceleration") {
        cfg.tabulated_mode = DriveMode::kAcceleration;
      } else {
        errs.push_back("tabulated trajectory needs mode 'velocity' or 'acceleration'");
      }
      if (!tj.contains("samples") || !tj["samples"].is_array() || tj["samples"].size() < 2) {
        errs.push_back("tabulated trajectory needs a 'samples' array with >= 2 rows");
      } else {
        for (const auto& row : tj["samples"]) {
          if (!row.is_array() || row.size() != 7) {
            errs.push_back("tabulated sample rows must be [t, lin x,y,z, omega x,y,z]");
            break;
          }
          std::array<double, 7> r{};
          for (int i = 0; i < 7; ++i) r[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(i)].get<double>();
          cfg.tabulated_rows.push_back(r);
        }
      }
    }
  }

  get_double(j, "duration_s", cfg.duration_s, errs);
  get_double(j, "dt_s", cfg.dt_s, errs);
  get_double(j, "gravity", cfg.gravity_z, errs);
  get_double(j, "r_min", cfg.r_min, errs);
  get_double(j, "ie_delta", cfg.ie_delta, errs);
  get_double(j, "pe_window_s", cfg.pe_window_s, errs);
  get_double(j, "summary_tolerance", cfg.summary_tolerance, errs);
  get_double(j, "settle_fraction", cfg.settle_fraction, errs);

  if (j.contains("bias") && !parse_vec3(j["bias"], cfg.bias)) {
    errs.push_back("field 'bias' must be a 3-array of numbers");
  }
  if (j.contains("noise")) {
    const auto& nj = j["noise"];
    if (!nj.is_object()) {
      errs.push_back("field 'noise' must be an object");
    } else {
      get_double(nj, "sigma_accel", cfg.noise.sigma_accel, errs);
      get_double(nj, "sigma_gyro", cfg.noise.sigma_gyro, errs);
      get_double(nj, "sigma_bearing", cfg.noise.sigma_bearing, errs);
    }
  }
  if (j.contains("features")) {
    if (!j["features"].is_array()) {
      errs.push_back("field 'features' must be an array of 3-arrays");
    } else {
      for (const auto& f : j["features"]) {
        Vec3 v;
        if (!parse_vec3(f, v)) {
          errs.push_back("each feature must be a 3-array of numbers");
          break;
        }
        cfg.features.push_back(v);
      }
    }
  }
  if (j.contains("gains")) {
    if (!j["gains"].is_object()) {
      errs.push_back("field 'gains' must be a flat object of numbers");
    } else {
      for (const auto& [k, v] : j["gains"].items()) {
        if (!v.is_number()) {
          errs.push_back("gain '" + k + "' must be a number");
        } else {
          cfg.gains[k] = v.get<double>();
        }
      }
    }
  }
  if (j.contains("theta0")) {
    if (!j["theta0"].is_array()) {
      errs.push_back("field 'theta0' must be an array of numbers");
    } else {
      for (const auto& v : j["theta0"]) cfg.theta0.push_back(v.get<double>());
    }
  }
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    if (!j["seeds"].is_array() || j["seeds"].empty()) {
      errs.push_back("field 'seeds' must be a non-empty array of integers");
    } else {
      for (const auto& v : j["seeds"]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          errs.push_back("seeds must be non-negative integers");
          break;
        }
        cfg.seeds.push_back(v.get<std::uint64_t>());
      }
    }
  }
  Vec3 tmp;
  if (j.contains("x0")) {
    if (parse_vec3(j["x0"], tmp)) cfg.x0_override = tmp;
    else errs.push_back("field 'x0' must be a 3-array of numbers");
  }
  if (j.contains("v0")) {
    if (parse_vec3(j["v0"], tmp)) cfg.v0_override = tmp;
    else errs.push_back("field 'v0' must be a 3-array of numbers");
  }
  if (j.contains("outputs")) {
    if (!j["outputs"].is_array()) {
      errs.push_back("field 'outputs' must be an array of column names");
    } else {
      for (const auto& v : j["outputs"]) cfg.outputs.push_back(v.get<std::string>());
    }
  }

  auto more = validate_scenario(cfg);
  errs.insert(errs.end(), more.begin(), more.end());
  if (!errs.empty()) {
    throw ConfigError(errs);
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError({"cannot open config file: " + path});
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::vector<std::string> validate_scenario(const ScenarioConfig& cfg) {
  std::vector<std::string> errs;

  if (cfg.duration_s <= 0.0) errs.push_back("duration_s must be positive");
  if (cfg.dt_s <= 0.0) errs.push_back("dt_s must be positive");
  if (cfg.duration_s > 0.0 && cfg.dt_s > 0.0 && cfg.duration_s < cfg.dt_s) {
    errs.push_back("duration_s must be at least one step");
  }
  if (cfg.r_min <= 0.0) errs.push_back("r_min must be positive");
  if (cfg.noise.sigma_accel < 0.0 || cfg.noise.sigma_gyro < 0.0 ||
      cfg.noise.sigma_bearing < 0.0) {
    errs.push_back("noise sigmas must be non-negative");
  }
  if (cfg.seeds.empty()) errs.push_back("at least one seed is required");
  if (cfg.summary_tolerance <= 0.0) errs.push_back("summary_tolerance must be positive");
  if (cfg.settle_fraction < 0.0 || cfg.settle_fraction >= 1.0) {
    errs.push_back("settle_fraction must be in [0, 1)");
  }
  if (cfg.pe_window_s <= 0.0) errs.push_back("pe_window_s must be positive");
  if (cfg.ie_delta <= 0.0) errs.push_back("ie_delta must be positive");

  // Gains: unknown keys are errors, not typos to ignore.
  const auto& allowed = allowed_gains(cfg.observer);
  for (const auto& [k, v] : cfg.gains) {
    if (!allowed.count(k)) {
      errs.push_back("unknown gain '" + k + "' for observer " + observer_name(cfg.observer));
    }
  }
  if (cfg.gain("alpha", 1.0) <= 0.0) errs.push_back("gain 'alpha' must be positive");
  if (cfg.gain("gamma", 1.0) <= 0.0) errs.push_back("gain 'gamma' must be positive");
  if (cfg.observer == ObserverKind::kPvDrem || cfg.observer == ObserverKind::kNavigation) {
    if (cfg.gain("rho", 0.4) <= 0.0) errs.push_back("gain 'rho' must be positive");
    if (cfg.gain("kp", 1.0) <= 0.0) errs.push_back("gain 'kp' must be positive");
  }

  // Observer / trajectory compatibility.
  const bool needs_velocity =
      cfg.observer == ObserverKind::kGradient || cfg.observer == ObserverKind::kPebo;
  if (needs_velocity && cfg.drive_mode() != DriveMode::kVelocity) {
    errs.push_back("observer " + observer_name(cfg.observer) +
                   " needs a velocity-driven trajectory");
  }
  if (!needs_velocity && cfg.drive_mode() != DriveMode::kAcceleration) {
    errs.push_back("observer " + observer_name(cfg.observer) +
                   " needs an acceleration-driven trajectory");
  }
  if ((cfg.x0_override || cfg.v0_override) &&
      cfg.trajectory_kind != TrajectoryKind::kTabulated) {
    errs.push_back("x0/v0 overrides apply to tabulated trajectories only");
  }
  if (cfg.trajectory_kind == TrajectoryKind::kTabulated && !cfg.x0_override) {
    errs.push_back("tabulated trajectories need an explicit x0");
  }

  if (cfg.features.empty()) {
    errs.push_back("at least one feature is required");
  }
  if ((cfg.observer == ObserverKind::kGradient || cfg.observer == ObserverKind::kPebo ||
       cfg.observer == ObserverKind::kPvDrem) &&
      cfg.features.size() != 1) {
    errs.push_back("observer " + observer_name(cfg.observer) + " uses exactly one feature");
  }
  if (cfg.observer == ObserverKind::kNavigation) {
    bool ok = cfg.features.size() >= 2;
    if (ok) {
      // Consecutive landmark differences must span a plane.
      std::vector<Vec3> eta;
      for (std::size_t i = 0; i + 1 < cfg.features.size(); ++i) {
        eta.push_back(cfg.features[i + 1] - cfg.features[i]);
      }
      bool non_collinear = false;
      for (std::size_t i = 0; i < eta.size() && !non_collinear; ++i) {
        for (std::size_t k = i + 1; k < eta.size(); ++k) {
          if (eta[i].cross(eta[k]).norm() > 1e-9 * eta[i].norm() * eta[k].norm()) {
            non_collinear = true;
            break;
          }
        }
      }
      ok = non_collinear;
    }
    if (!ok) {
      errs.push_back(
          "navigation landmark geometry: need >= 2 landmarks with non-collinear "
          "consecutive difference vectors (non-collinear assumption violated)");
    }
  }

  if (!cfg.theta0.empty()) {
    const std::size_t want = cfg.observer == ObserverKind::kPvDrem
                                 ? 10u
                                 : (cfg.observer == ObserverKind::kNavigation
                                        ? 9u + cfg.features.size()
                                        : 0u);
    if (want == 0u) {
      errs.push_back("theta0 array applies only to pv_drem / navigation observers");
    } else if (cfg.theta0.size() != want) {
      errs.push_back("theta0 must have dimension " + std::to_string(want));
    }
  }

  if (cfg.trajectory_kind == TrajectoryKind::kTabulated) {
    if (cfg.tabulated_rows.size() < 2) {
      errs.push_back("tabulated trajectory needs >= 2 sample rows");
    } else {
      bool increasing = true;
      for (std::size_t i = 1; i < cfg.tabulated_rows.size(); ++i) {
        if (cfg.tabulated_rows[i][0] <= cfg.tabulated_rows[i - 1][0]) increasing = false;
      }
      if (!increasing) {
        errs.push_back("tabulated sample times must be strictly increasing");
      } else if (cfg.tabulated_rows.front()[0] > 0.0 ||
                 cfg.tabulated_rows.back()[0] < cfg.duration_s) {
        errs.push_back("tabulated samples must cover [0, duration_s]");
      }
    }
  }

  // Initial ranges must respect the minimum-range guard. All closed-form
  // trajectories start at (1, 0, 0).
  if (!cfg.features.empty() && cfg.r_min > 0.0) {
    const Vec3 x0 = cfg.trajectory_kind == TrajectoryKind::kTabulated
                        ? cfg.x0_override.value_or(Vec3::Zero())
                        : Vec3(1, 0, 0);
    for (std::size_t i = 0; i < cfg.features.size(); ++i) {
      if ((cfg.features[i] - x0).norm() < cfg.r_min) {
        errs.push_back("feature " + std::to_string(i) + " starts inside r_min");
      }
    }
  }

  return errs;
}

// ---------------------------------------------------------------------------
// Runner

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ErrorMetric make_metric(const std::vector<double>& t, const std::vector<double>& err,
                        double tol, double settle_fraction) {
  ErrorMetric m;
  if (t.empty()) return m;
  const double t_end = t.back();
  const double t_last = std::max(t.front(), t_end - 1.0);
  const double t_settle = t.front() + settle_fraction * (t_end - t.front());

  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] >= t_last) {
      sum += err[k];
      ++count;
    }
    if (t[k] >= t_settle) {
      m.max_after_settle = std::max(m.max_after_settle, err[k]);
    }
  }
  m.final_mean = count > 0 ? sum / count : 0.0;

  // Earliest time after which the error never leaves the tolerance band.
  double suffix_max = 0.0;
  std::optional<double> t_tol;
  for (std::size_t k = t.size(); k-- > 0;) {
    suffix_max = std::max(suffix_max, err[k]);
    if (suffix_max <= tol) {
      t_tol = t[k];
    }
  }
  m.time_to_tolerance = t_tol;
  return m;
}

double att_distance(const Mat3& m) {
  const double radicand = (3.0 - m.trace()) / 4.0;
  return std::sqrt(std::clamp(radicand, 0.0, 1.0));
}

struct VectorGramTracker {
  explicit VectorGramTracker(int n, int stride)
      : gram(Eigen::MatrixXd::Zero(n, n)), stride(stride) {}

  void add(double t, const Eigen::MatrixXd& psi, double dt) {
    // Trapezoid on psi psi^T between consecutive nodes.
    const Eigen::MatrixXd outer = psi * psi.transpose();
    if (have_prev) {
      gram += (0.5 * dt) * (prev_outer + outer);
    }
    prev_outer = outer;
    have_prev = true;
    if (count % stride == 0) {
      times.push_back(t);
      prefixes.push_back(gram);
    }
    ++count;
  }

  Eigen::MatrixXd gram;
  Eigen::MatrixXd prev_outer;
  bool have_prev = false;
  int stride = 1;
  long count = 0;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> prefixes;
};

double lambda_min_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff();
}

ExcitationReport report_from_tracker(const VectorGramTracker& trk, double delta,
                                     double window, const std::string& name) {
  ExcitationReport rep;
  rep.signal_name = name;
  rep.ie_threshold = delta;
  rep.pe_window = window;
  for (std::size_t k = 0; k < trk.times.size(); ++k) {
    const double lmin = lambda_min_sym(trk.prefixes[k]);
    rep.gram_trace.push_back({trk.times[k], lmin, trk.prefixes[k].trace()});
    if (!rep.ie_time && lmin >= delta) {
      rep.ie_time = trk.times[k];
      rep.ie_level = lmin;
    }
  }
  if (!rep.gram_trace.empty() && !rep.ie_time) {
    rep.ie_level = rep.gram_trace.back().lambda_min;
  }

  const double t_end = trk.times.empty() ? 0.0 : trk.times.back();
  rep.pe_late_from = 0.5 * t_end;
  double best = std::numeric_limits<double>::infinity();
  double best_late = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < trk.times.size(); ++a) {
    std::size_t b = a;
    while (b < trk.times.size() && trk.times[b] - trk.times[a] < window) ++b;
    if (b >= trk.times.size()) break;
    const double lmin = lambda_min_sym(trk.prefixes[b] - trk.prefixes[a]);
    best = std::min(best, lmin);
    if (trk.times[a] >= rep.pe_late_from) best_late = std::min(best_late, lmin);
  }
  rep.pe_level = std::isfinite(best) ? best : 0.0;
  rep.pe_level_late = std::isfinite(best_late) ? best_late : rep.pe_level;
  return rep;
}

}  // namespace

std::string RunSummary::to_json() const {
  json j;
  j["name"] = name;
  j["observer"] = observer;
  j["seed"] = seed;
  j["noise_free"] = noise_free;
  j["duration_s"] = duration_s;
  j["dt_s"] = dt_s;
  j["aborted"] = aborted;
  if (aborted) {
    j["abort_time"] = abort_time;
    j["abort_feature"] = abort_feature;
  }
  j["has_nan"] = has_nan;
  for (const auto& [k, m] : errors) {
    json e;
    e["final_mean"] = m.final_mean;
    e["max_after_settle"] = m.max_after_settle;
    if (m.time_to_tolerance) {
      e["time_to_tolerance"] = *m.time_to_tolerance;
    } else {
      e["time_to_tolerance"] = nullptr;
    }
    j["errors"][k] = e;
  }
  j["max_cond_psi"] = max_cond_psi;
  j["final_omega"] = final_omega;
  j["final_delta"] = final_delta;
  j["max_update_rate"] = max_update_rate;
  return j.dump(2);
}

std::string RunResult::csv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out += columns[c];
    out += (c + 1 == columns.size()) ? '\n' : ',';
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += fmt(row[c]);
      out += (c + 1 == row.size()) ? '\n' : ',';
    }
  }
  return out;
}

int RunResult::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::vector<double> RunResult::series(const std::string& name) const {
  const int c = column(name);
  if (c < 0) {
    throw std::invalid_argument("unknown trace column: " + name);
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back(r[static_cast<std::size_t>(c)]);
  }
  return out;
}

RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed, bool noise_free) {
  {
    auto errs = validate_scenario(cfg);
    if (!errs.empty()) throw ConfigError(errs);
  }

  Trajectory traj = cfg.make_trajectory();
  const Vec3 g(0.0, 0.0, cfg.gravity_z);
  TruthSimulator sim(traj, cfg.features, g, cfg.bias, cfg.r_min);
  const int nf = static_cast<int>(cfg.features.size());
  MeasurementSynthesizer synth(cfg.noise, seed, nf, noise_free);

  const double dt = cfg.dt_s;
  const long n_steps = std::llround(cfg.duration_s / dt);

  MeasurementSample m_prev = synth.sample(sim, sim.state(), 0.0);

  // Ground-truth parameter vectors for the vector observers.
  Eigen::VectorXd theta_true;
  if (cfg.observer == ObserverKind::kPvDrem) {
    theta_true.resize(10);
    theta_true(0) = sim.state().range(0);
    theta_true.segment<3>(1) = sim.state().v;
    theta_true.segment<3>(4) = cfg.bias;
    theta_true.segment<3>(7) = g;  // Q(0) = R(0) = I
  } else if (cfg.observer == ObserverKind::kNavigation) {
    theta_true.resize(9 + nf);
    theta_true.segment<3>(0) = sim.state().v;
    theta_true.segment<3>(3) = cfg.bias;
    theta_true.segment<3>(6) = g;
    for (int i = 0; i < nf; ++i) theta_true(9 + i) = sim.state().range(i);
  }

  // Observer construction from the first sample (exact filter init).
  std::optional<GradientObserver> grad;
  std::optional<PeboObserver> pebo;
  std::optional<PvObserver> pv;
  std::optional<NavObserver> nav;
  const double alpha = cfg.gain("alpha", 1.0);
  const double gamma = cfg.gain("gamma", 50.0);
  switch (cfg.observer) {
    case ObserverKind::kGradient: {
      GradientObserver::Params p;
      p.alpha = alpha;
      p.gamma = gamma;
      p.rhat0 = cfg.gain("rhat0", 0.0);
      p.xi0 = cfg.gain("xi0", 0.0);
      grad.emplace(p, m_prev);
      break;
    }
    case ObserverKind::kPebo: {
      PeboObserver::Params p;
      p.alpha = alpha;
      p.gamma = gamma;
      p.kp_mix = cfg.gain("kp_mix", 1.0);
      p.zeta0 = cfg.gain("zeta0", 0.0);
      p.theta0 = cfg.gain("theta0", 0.0);
      p.xi0 = cfg.gain("xi0", 0.0);
      p.gradient_flow = cfg.gain("gradient_flow", 0.0) != 0.0;
      pebo.emplace(p, m_prev);
      break;
    }
    case ObserverKind::kPvDrem: {
      PvObserver::Params p;
      p.alpha = cfg.gain("alpha", 2.0);
      p.gamma = cfg.gain("gamma", 100.0);
      p.rho = cfg.gain("rho", 0.4);
      p.kp = cfg.gain("kp", 500.0);
      if (!cfg.theta0.empty()) {
        p.theta0 = Eigen::Map<const Eigen::VectorXd>(cfg.theta0.data(),
                                                     static_cast<long>(cfg.theta0.size()));
      }
      pv.emplace(p, m_prev);
      break;
    }
    case ObserverKind::kNavigation: {
      NavObserver::Params p;
      p.alpha = cfg.gain("alpha", 1.0);
      p.gamma = cfg.gain("gamma", 100.0);
      p.rho = cfg.gain("rho", 0.4);
      p.kp = cfg.gain("kp", 1000.0);
      p.k_att = cfg.gain("k_att", 1.0);
      p.sigma_pos = cfg.gain("sigma_pos", 1.0);
      if (!cfg.theta0.empty()) {
        p.theta0 = Eigen::Map<const Eigen::VectorXd>(cfg.theta0.data(),
                                                     static_cast<long>(cfg.theta0.size()));
      }
      nav.emplace(p, cfg.features, m_prev);
      break;
    }
  }

  RunResult res;
  res.summary.name = cfg.name;
  res.summary.observer = observer_name(cfg.observer);
  res.summary.seed = seed;
  res.summary.noise_free = noise_free;
  res.summary.duration_s = cfg.duration_s;
  res.summary.dt_s = dt;

  // Column layouts.
  auto push = [&](std::initializer_list<std::string> names) {
    for (const auto& n : names) res.columns.push_back(n);
  };
  push({"t"});
  if (cfg.observer == ObserverKind::kNavigation) {
    push({"x_x", "x_y", "x_z", "v_x", "v_y", "v_z"});
    for (int i = 0; i < nf; ++i) res.columns.push_back("r_" + std::to_string(i + 1));
    push({"xhat_x", "xhat_y", "xhat_z", "vhat_x", "vhat_y", "vhat_z", "bahat_x", "bahat_y",
          "bahat_z", "gchat_x", "gchat_y", "gchat_z"});
    for (int i = 0; i < nf; ++i) res.columns.push_back("rhat_" + std::to_string(i + 1));
    push({"err_x", "err_v", "err_att", "att_dist"});
    for (int i = 0; i < nf; ++i) res.columns.push_back("err_z_" + std::to_string(i + 1));
    push({"err_theta", "delta", "omega", "cond_psi", "qc_ortho"});
  } else {
    push({"z_x", "z_y", "z_z", "r", "v_x", "v_y", "v_z", "x_x", "x_y", "x_z"});
    if (cfg.observer == ObserverKind::kGradient) {
      push({"rhat", "zhat_x", "zhat_y", "zhat_z", "err_z", "err_r", "phi_x", "phi_y",
            "phi_z", "xi"});
    } else if (cfg.observer == ObserverKind::kPebo) {
      push({"rhat", "zhat_x", "zhat_y", "zhat_z", "err_z", "err_r", "theta_hat", "omega",
            "zeta", "xi", "gram", "phi_x", "phi_y", "phi_z"});
    } else {
      push({"zhat_x", "zhat_y", "zhat_z", "vhat_x", "vhat_y", "vhat_z", "bahat_x",
            "bahat_y", "bahat_z", "gchat_x", "gchat_y", "gchat_z", "rhat", "err_z",
            "err_r", "err_v", "err_ba", "err_gc", "err_theta", "delta", "omega",
            "cond_psi"});
    }
  }

  std::vector<double> phi_times;
  std::vector<Eigen::VectorXd> phi_trace;
  const int gram_stride =
      std::max<int>(1, static_cast<int>(n_steps / 400));
  VectorGramTracker psi_tracker(
      cfg.observer == ObserverKind::kPvDrem ? 10 : 9 + nf, gram_stride);

  const double kp_vec = cfg.gain("kp", cfg.observer == ObserverKind::kPvDrem ? 500.0 : 1000.0);
  const double kp_mix = cfg.gain("kp_mix", 1.0);

  auto record = [&](double t) {
    std::vector<double> row;
    row.reserve(res.columns.size());
    const RobotTruth& s = sim.state();
    row.push_back(t);
    if (cfg.observer == ObserverKind::kNavigation) {
      for (int i = 0; i < 3; ++i) row.push_back(s.x(i));
      for (int i = 0; i < 3; ++i) row.push_back(s.v(i));
      for (int i = 0; i < nf; ++i) row.push_back(s.range(i));
      const NavEstimate e = nav->estimate();
      const Vec3& xh = nav->x_hat();
      for (int i = 0; i < 3; ++i) row.push_back(xh(i));
      for (int i = 0; i < 3; ++i) row.push_back(e.v_hat(i));
      for (int i = 0; i < 3; ++i) row.push_back(e.ba_hat(i));
      for (int i = 0; i < 3; ++i) row.push_back(e.gc_hat(i));
      for (int i = 0; i < nf; ++i) row.push_back(e.r_hat(i));
      const Mat3 Rhat = nav->R_hat().matrix();
      const Mat3 R = s.R.matrix();
      row.push_back((xh - s.x).norm());
      row.push_back((e.v_hat - s.v).norm());
      row.push_back((Rhat - R).norm());
      row.push_back(att_distance(Rhat * R.transpose()));
      for (int i = 0; i < nf; ++i) {
        row.push_back((e.z_hat[static_cast<std::size_t>(i)] -
                       s.features_body[static_cast<std::size_t>(i)])
                          .norm());
      }
      row.push_back((nav->theta_hat() - theta_true).lpNorm<Eigen::Infinity>());
      const double delta = nav->delta();
      row.push_back(delta);
      row.push_back(nav->omega());
      row.push_back(nav->cond_psi());
      const Mat3 qc = nav->Qc_hat().matrix();
      row.push_back((qc.transpose() * qc - Mat3::Identity()).norm());
      res.summary.max_update_rate =
          std::max(res.summary.max_update_rate,
                   cfg.gain("gamma", 100.0) *
                       (1.0 - nav->omega() + kp_vec * delta * delta) * dt);
    } else {
      const Vec3& z = s.features_body[0];
      for (int i = 0; i < 3; ++i) row.push_back(z(i));
      row.push_back(z.norm());
      for (int i = 0; i < 3; ++i) row.push_back(s.v(i));
      for (int i = 0; i < 3; ++i) row.push_back(s.x(i));
      if (cfg.observer == ObserverKind::kGradient) {
        const Vec3 zh = grad->z_hat();
        row.push_back(grad->r_hat());
        for (int i = 0; i < 3; ++i) row.push_back(zh(i));
        row.push_back((zh - z).norm());
        row.push_back(std::abs(grad->r_hat() - z.norm()));
        const Vec3 ph = grad->phi();
        for (int i = 0; i < 3; ++i) row.push_back(ph(i));
        row.push_back(grad->xi());
        phi_times.push_back(t);
        phi_trace.push_back(ph);
      } else if (cfg.observer == ObserverKind::kPebo) {
        const Vec3 zh = pebo->z_hat();
        row.push_back(pebo->r_hat());
        for (int i = 0; i < 3; ++i) row.push_back(zh(i));
        row.push_back((zh - z).norm());
        row.push_back(std::abs(pebo->r_hat() - z.norm()));
        row.push_back(pebo->theta_hat());
        row.push_back(pebo->omega());
        row.push_back(pebo->zeta());
        row.push_back(pebo->xi());
        row.push_back(pebo->excitation_integral());
        const Vec3 ph = pebo->phi();
        for (int i = 0; i < 3; ++i) row.push_back(ph(i));
        phi_times.push_back(t);
        phi_trace.push_back(ph);
        res.summary.max_update_rate =
            std::max(res.summary.max_update_rate,
                     gamma * ((1.0 - pebo->omega()) + kp_mix * ph.squaredNorm()) * dt);
      } else {
        const PvEstimate e = pv->estimate();
        for (int i = 0; i < 3; ++i) row.push_back(e.z_hat(i));
        for (int i = 0; i < 3; ++i) row.push_back(e.v_hat(i));
        for (int i = 0; i < 3; ++i) row.push_back(e.ba_hat(i));
        for (int i = 0; i < 3; ++i) row.push_back(e.gc_hat(i));
        row.push_back(e.r_hat);
        row.push_back((e.z_hat - z).norm());
        row.push_back(std::abs(e.r_hat - z.norm()));
        row.push_back((e.v_hat - s.v).norm());
        row.push_back((e.ba_hat - cfg.bias).norm());
        row.push_back((e.gc_hat - g).norm());
        row.push_back((pv->theta_hat() - theta_true).lpNorm<Eigen::Infinity>());
        const double delta = pv->delta();
        row.push_back(delta);
        row.push_back(pv->omega());
        row.push_back(pv->cond_psi());
        psi_tracker.add(t, pv->extension().psi(pv->extension().state(),
                                               m_prev.y()),
                        dt);
        res.summary.max_update_rate =
            std::max(res.summary.max_update_rate,
                     cfg.gain("gamma", 100.0) *
                         (1.0 - pv->omega() + kp_vec * delta * delta) * dt);
      }
    }
    if (cfg.observer == ObserverKind::kNavigation) {
      psi_tracker.add(t, nav->extension().psi(nav->extension().state(), m_prev.bearings),
                      dt);
    }
    for (double v : row) {
      if (!std::isfinite(v)) res.summary.has_nan = true;
    }
    if (cfg.observer == ObserverKind::kPvDrem || cfg.observer == ObserverKind::kNavigation) {
      const int c = res.column("cond_psi");
      res.summary.max_cond_psi = std::max(res.summary.max_cond_psi,
                                          row[static_cast<std::size_t>(c)]);
    }
    res.rows.push_back(std::move(row));
  };

  record(0.0);
  for (long k = 0; k < n_steps && !res.summary.has_nan; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double t1 = t0 + dt;
    MeasurementSample m_mid;
    MeasurementSample m_next;
    try {
      const RobotTruth mid = sim.probe_half(dt);
      m_mid = synth.sample(sim, mid, t0 + 0.5 * dt);
      sim.advance(dt);
      m_next = synth.sample(sim, sim.state(), t1);
    } catch (const MinRangeViolation& v) {
      res.summary.aborted = true;
      res.summary.abort_time = v.time();
      res.summary.abort_feature = v.feature();
      break;
    }
    switch (cfg.observer) {
      case ObserverKind::kGradient: grad->step(m_prev, m_mid, m_next, dt); break;
      case ObserverKind::kPebo: pebo->step(m_prev, m_mid, m_next, dt); break;
      case ObserverKind::kPvDrem: pv->step(m_prev, m_mid, m_next, dt); break;
      case ObserverKind::kNavigation: nav->step(m_prev, m_mid, m_next, dt); break;
    }
    m_prev = m_next;
    record(t1);
  }

  // Summary metrics.
  const auto t_series = res.series("t");
  auto add_metric = [&](const std::string& col) {
    if (res.column(col) >= 0) {
      res.summary.errors[col] = make_metric(t_series, res.series(col),
                                            cfg.summary_tolerance, cfg.settle_fraction);
    }
  };
  switch (cfg.observer) {
    case ObserverKind::kGradient:
    case ObserverKind::kPebo:
      add_metric("err_z");
      add_metric("err_r");
      break;
    case ObserverKind::kPvDrem:
      add_metric("err_z");
      add_metric("err_v");
      add_metric("err_ba");
      add_metric("err_gc");
      add_metric("err_theta");
      break;
    case ObserverKind::kNavigation: {
      add_metric("err_x");
      add_metric("err_att");
      add_metric("err_v");
      add_metric("err_theta");
      // Worst landmark position error per node.
      std::vector<double> worst(res.rows.size(), 0.0);
      for (int i = 0; i < nf; ++i) {
        const auto zi = res.series("err_z_" + std::to_string(i + 1));
        for (std::size_t k = 0; k < zi.size(); ++k) worst[k] = std::max(worst[k], zi[k]);
      }
      res.summary.errors["err_z_max"] =
          make_metric(t_series, worst, cfg.summary_tolerance, cfg.settle_fraction);
      break;
    }
  }
  if (cfg.observer == ObserverKind::kPebo) {
    res.summary.final_omega = pebo->omega();
  } else if (cfg.observer == ObserverKind::kPvDrem) {
    res.summary.final_omega = pv->omega();
    res.summary.final_delta = pv->delta();
  } else if (cfg.observer == ObserverKind::kNavigation) {
    res.summary.final_omega = nav->omega();
    res.summary.final_delta = nav->delta();
  }

  // Excitation diagnostics on the run's regressor.
  if (cfg.observer == ObserverKind::kGradient || cfg.observer == ObserverKind::kPebo) {
    if (phi_times.size() >= 2) {
      res.excitation = analyze_excitation(phi_times, phi_trace, cfg.ie_delta,
                                          cfg.pe_window_s, "phi");
    }
  } else {
    res.excitation =
        report_from_tracker(psi_tracker, cfg.ie_delta, cfg.pe_window_s, "psi");
  }

  if (res.summary.max_cond_psi > 1e8) {
    std::cerr << "warning: " << cfg.name << " cond(Psi) reached "
              << res.summary.max_cond_psi << "\n";
  }

  // Optional column subset for the exported trace; metrics above always see
  // the full set.
  if (!cfg.outputs.empty()) {
    std::vector<int> keep = {0};  // t stays
    std::vector<std::string> missing;
    for (const auto& name : cfg.outputs) {
      const int c = res.column(name);
      if (c < 0) {
        missing.push_back("unknown output column '" + name + "'");
      } else if (c != 0) {
        keep.push_back(c);
      }
    }
    if (!missing.empty()) {
      throw ConfigError(missing);
    }
    std::vector<std::string> cols;
    for (int c : keep) cols.push_back(res.columns[static_cast<std::size_t>(c)]);
    for (auto& row : res.rows) {
      std::vector<double> slim;
      slim.reserve(keep.size());
      for (int c : keep) slim.push_back(row[static_cast<std::size_t>(c)]);
      row = std::move(slim);
    }
    res.columns = std::move(cols);
  }
  return res;
}

}  // namespace rpebo
