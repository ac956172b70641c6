#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rpebo/excitation.hpp"
#include "rpebo/observers.hpp"
#include "rpebo/simulator.hpp"
#include "rpebo/trajectory.hpp"

namespace rpebo {

enum class ObserverKind { kGradient, kPebo, kPvDrem, kNavigation };

std::string observer_name(ObserverKind k);

/// Whether a gain key is meaningful for the given observer.
bool gain_allowed(ObserverKind k, const std::string& key);

/// Declarative description of one simulation run: trajectory, sensors,
/// observer, gains, duration and seeds. Loaded from JSON; every validation
/// problem is reported, not just the first.
struct ScenarioConfig {
  std::string name = "scenario";
  ObserverKind observer = ObserverKind::kGradient;

  TrajectoryKind trajectory_kind = TrajectoryKind::kPe;
  DriveMode tabulated_mode = DriveMode::kVelocity;
  std::vector<std::array<double, 7>> tabulated_rows;

  double duration_s = 20.0;
  double dt_s = 1e-3;
  double gravity_z = 9.81;
  Vec3 bias = Vec3::Zero();
  NoiseSpec noise;
  std::vector<Vec3> features;

  std::map<std::string, double> gains;
  std::vector<double> theta0;  // optional initial parameter guess (vector observers)

  std::vector<std::uint64_t> seeds{1};
  std::optional<Vec3> x0_override;
  std::optional<Vec3> v0_override;
  double r_min = 0.1;

  double ie_delta = 1e-6;
  double pe_window_s = 4.0;
  double summary_tolerance = 1e-2;
  double settle_fraction = 0.5;
  std::vector<std::string> outputs;  // optional column subset for the CSV

  double gain(const std::string& key, double fallback) const {
    const auto it = gains.find(key);
    return it == gains.end() ? fallback : it->second;
  }

  DriveMode drive_mode() const;
  Trajectory make_trajectory() const;
};

/// Parses and validates. Throws ConfigError carrying all problems found.
ScenarioConfig load_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

/// Validation only; empty result means the config is runnable.
std::vector<std::string> validate_scenario(const ScenarioConfig& cfg);

struct ErrorMetric {
  double final_mean = 0.0;               // mean over the last second
  double max_after_settle = 0.0;         // max after settle_fraction * duration
  std::optional<double> time_to_tolerance;  // earliest t with the error inside
                                            // tolerance for the rest of the run
};

struct RunSummary {
  std::string name;
  std::string observer;
  std::uint64_t seed = 0;
  bool noise_free = false;
  double duration_s = 0.0;
  double dt_s = 0.0;
  bool aborted = false;
  double abort_time = 0.0;
  int abort_feature = -1;
  bool has_nan = false;
  std::map<std::string, ErrorMetric> errors;
  double max_cond_psi = 0.0;   // vector observers only
  double final_omega = 1.0;
  double final_delta = 0.0;    // vector observers only
  double max_update_rate = 0.0;  // max of gamma*(regressor gain)*dt, explicit-step margin

  std::string to_json() const;
};

struct RunResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  RunSummary summary;
  ExcitationReport excitation;

  std::string csv() const;
  int column(const std::string& name) const;  // -1 if absent
  std::vector<double> series(const std::string& name) const;
};

/// Runs one scenario to completion (or range abort). Deterministic for a
/// fixed (config, seed, noise_free) triple.
RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed, bool noise_free = false);

}  // namespace rpebo
