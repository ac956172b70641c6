#pragma once

#include <functional>
#include <vector>

#include "rpebo/errors.hpp"
#include "rpebo/lie3.hpp"
#include "rpebo/rng.hpp"
#include "rpebo/trajectory.hpp"

namespace rpebo {

/// Ground-truth rigid-body state. Feature positions are carried twice: the
/// body-frame z_i are integrated states, the inertial anchors are constants,
/// and z_i = R^T (anchor_i - x) must hold within integration tolerance.
struct RobotTruth {
  Rot3 R;                           // attitude, body to inertial
  Vec3 x = Vec3::Zero();            // inertial position [m]
  Vec3 v = Vec3::Zero();            // body-frame velocity [m/s]
  std::vector<Vec3> features_body;  // z_i [m]
  std::vector<Vec3> anchors;        // constant inertial feature positions [m]

  double range(int i) const { return features_body[static_cast<std::size_t>(i)].norm(); }
  Vec3 consistency_residual(int i) const {
    return features_body[static_cast<std::size_t>(i)] -
           R.transposed() * (anchors[static_cast<std::size_t>(i)] - x);
  }
};

struct NoiseSpec {
  double sigma_accel = 0.01;     // m/s^2, per axis
  double sigma_gyro = 0.001;     // rad/s, per axis
  double sigma_bearing = 0.005;  // unitless, pre-normalization, per axis

  bool any() const { return sigma_accel > 0.0 || sigma_gyro > 0.0 || sigma_bearing > 0.0; }
  static NoiseSpec zero() { return {0.0, 0.0, 0.0}; }
};

struct ImuReading {
  Vec3 accel = Vec3::Zero();  // apparent acceleration, body frame, bias and noise applied
  Vec3 omega = Vec3::Zero();  // rotational velocity, noise applied
};

struct BearingMeasurement {
  std::vector<UnitBearing> y;
  double t = 0.0;
};

/// One synchronized sensor sample handed to the observers.
struct MeasurementSample {
  double t = 0.0;
  ImuReading imu;
  Vec3 velocity = Vec3::Zero();  // body-frame velocity, velocity-measured problems only
  std::vector<Vec3> bearings;    // unit vectors

  const Vec3& y(int i = 0) const { return bearings[static_cast<std::size_t>(i)]; }

  BearingMeasurement bearing_measurement() const {
    BearingMeasurement b;
    b.t = t;
    b.y.reserve(bearings.size());
    for (const auto& v : bearings) {
      b.y.push_back(UnitBearing::from_vector(v));
    }
    return b;
  }
};

/// Advances one step of the body-frame dynamics
///   xdot = R v,  Rdot = R hat(omega),  vdot = -omega x v + a + b_a + R^T g,
///   zdot_i = -omega x z_i - v
/// with the measured-convention apparent acceleration a supplied as a function
/// of time (RK4 needs it at stage times). Throws MinRangeViolation if a
/// feature range drops below r_min.
RobotTruth step_truth(const RobotTruth& s, const std::function<Vec3(double)>& accel_meas,
                      const std::function<Vec3(double)>& omega, const Vec3& bias,
                      const Vec3& g, double t, double dt, double r_min = 0.1);

/// Fixed-step ground-truth integrator for a trajectory. Marches on the
/// scenario grid; mid-grid states for measurement synthesis come from probe
/// half-steps off the authoritative states.
class TruthSimulator {
 public:
  TruthSimulator(const Trajectory& traj, std::vector<Vec3> anchors, const Vec3& gravity,
                 const Vec3& bias, double r_min = 0.1);

  const RobotTruth& state() const { return truth_; }
  double time() const { return t_; }
  const Trajectory& trajectory() const { return traj_; }
  const Vec3& gravity() const { return gravity_; }
  const Vec3& bias() const { return bias_; }
  double r_min() const { return r_min_; }

  /// Advance the authoritative state by dt.
  void advance(double dt);

  /// State dt/2 ahead of the current authoritative state, without advancing.
  RobotTruth probe_half(double dt) const;

  /// Noise-free measured-convention apparent acceleration at (state, t):
  /// R^T (ia - g) - b_a. Only meaningful for acceleration-driven trajectories.
  Vec3 measured_accel(const RobotTruth& s, double t) const;

 private:
  RobotTruth integrate(const RobotTruth& s, double t0, double h, bool check_range) const;

  Trajectory traj_;
  Vec3 gravity_;
  Vec3 bias_;
  double r_min_;
  RobotTruth truth_;
  double t_ = 0.0;
  long steps_ = 0;
};

/// Draws sensor noise from per-channel streams and assembles measurement
/// samples. Deterministic given (seed, call order).
class MeasurementSynthesizer {
 public:
  MeasurementSynthesizer(const NoiseSpec& noise, std::uint64_t seed, int n_features,
                         bool noise_free);

  MeasurementSample sample(const TruthSimulator& sim, const RobotTruth& s, double t);

 private:
  NoiseSpec noise_;
  bool noise_free_;
  GaussianStream gyro_;
  GaussianStream accel_;
  std::vector<GaussianStream> bearing_;
};

}  // namespace rpebo
