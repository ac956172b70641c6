#include "rpebo/simulator.hpp"

#include <cmath>
#include <string>

#include "rpebo/rk4.hpp"

namespace rpebo {

namespace {

// Euclidean part of the truth state, flattened for RK4.
Eigen::VectorXd pack(const RobotTruth& s, bool with_velocity) {
  const int nf = static_cast<int>(s.features_body.size());
  Eigen::VectorXd v(3 + (with_velocity ? 3 : 0) + 3 * nf);
  v.segment<3>(0) = s.x;
  int off = 3;
  if (with_velocity) {
    v.segment<3>(off) = s.v;
    off += 3;
  }
  for (int i = 0; i < nf; ++i) {
    v.segment<3>(off + 3 * i) = s.features_body[static_cast<std::size_t>(i)];
  }
  return v;
}

void unpack(const Eigen::VectorXd& v, bool with_velocity, RobotTruth& s) {
  s.x = v.segment<3>(0);
  int off = 3;
  if (with_velocity) {
    s.v = v.segment<3>(off);
    off += 3;
  }
  for (std::size_t i = 0; i < s.features_body.size(); ++i) {
    s.features_body[i] = v.segment<3>(off + 3 * static_cast<int>(i));
  }
}

struct StageRot {
  Mat3 R0, Rm, R1;
};

// Stage rotations over [t, t+h]. The full-step increment uses only samples at
// t, t+h/2, t+h so that any other rotation propagated from the same samples
// stays in exact lockstep; the mid rotation may use quarter-point samples.
StageRot stage_rotations(const Rot3& R, const std::function<Vec3(double)>& omega, double t,
                         double h) {
  StageRot out;
  out.R0 = R.matrix();
  const Vec3 w0 = omega(t);
  const Vec3 wq = omega(t + 0.25 * h);
  const Vec3 wm = omega(t + 0.5 * h);
  const Vec3 w1 = omega(t + h);
  const Rot3 Rm = R * Rot3::exp(body_rotation_increment(w0, wq, wm, 0.5 * h));
  out.Rm = Rm.matrix();
  out.R1 = (R * Rot3::exp(body_rotation_increment(w0, wm, w1, h))).matrix();
  return out;
}

}  // namespace

RobotTruth step_truth(const RobotTruth& s, const std::function<Vec3(double)>& accel_meas,
                      const std::function<Vec3(double)>& omega, const Vec3& bias,
                      const Vec3& g, double t, double dt, double r_min) {
  const StageRot rot = stage_rotations(s.R, omega, t, dt);

  auto rhs = [&](const Eigen::VectorXd& y, double ts, const Mat3& Rs) {
    Eigen::VectorXd d(y.size());
    const Vec3 w = omega(ts);
    const Vec3 v = y.segment<3>(3);
    d.segment<3>(0) = Rs * v;
    d.segment<3>(3) = -w.cross(v) + accel_meas(ts) + bias + Rs.transpose() * g;
    const int nf = static_cast<int>((y.size() - 6) / 3);
    for (int i = 0; i < nf; ++i) {
      const Vec3 z = y.segment<3>(6 + 3 * i);
      d.segment<3>(6 + 3 * i) = -w.cross(z) - v;
    }
    return d;
  };

  Eigen::VectorXd y = pack(s, true);
  y = rk4_step(
      y, dt, [&](const Eigen::VectorXd& q) { return rhs(q, t, rot.R0); },
      [&](const Eigen::VectorXd& q) { return rhs(q, t + 0.5 * dt, rot.Rm); },
      [&](const Eigen::VectorXd& q) { return rhs(q, t + dt, rot.R1); });

  RobotTruth out = s;
  out.R = Rot3::from_matrix(rot.R1);
  unpack(y, true, out);
  for (std::size_t i = 0; i < out.features_body.size(); ++i) {
    if (out.features_body[i].norm() < r_min) {
      throw MinRangeViolation(t + dt, static_cast<int>(i), out.features_body[i].norm());
    }
  }
  return out;
}

TruthSimulator::TruthSimulator(const Trajectory& traj, std::vector<Vec3> anchors,
                               const Vec3& gravity, const Vec3& bias, double r_min)
    : traj_(traj), gravity_(gravity), bias_(bias), r_min_(r_min) {
  truth_.R = Rot3();
  truth_.x = traj.initial_position();
  truth_.anchors = std::move(anchors);
  truth_.v = traj.initial_inertial_velocity();  // R(0) = I
  truth_.features_body.reserve(truth_.anchors.size());
  for (const auto& a : truth_.anchors) {
    truth_.features_body.push_back(a - truth_.x);
    if (truth_.features_body.back().norm() < r_min_) {
      throw MinRangeViolation(0.0, static_cast<int>(truth_.features_body.size()) - 1,
                              truth_.features_body.back().norm());
    }
  }
}

RobotTruth TruthSimulator::integrate(const RobotTruth& s, double t0, double h,
                                     bool check_range) const {
  auto omega = [this](double ts) { return traj_.omega(ts); };
  const StageRot rot = stage_rotations(s.R, omega, t0, h);
  const bool accel_mode = traj_.mode() == DriveMode::kAcceleration;

  auto rhs = [&](const Eigen::VectorXd& y, double ts, const Mat3& Rs) {
    Eigen::VectorXd d(y.size());
    const Vec3 w = traj_.omega(ts);
    Vec3 v;
    int off = 3;
    if (accel_mode) {
      v = y.segment<3>(3);
      // a_meas + bias + R^T g collapses to R^T ia; keeping the split form
      // mirrors the dynamics the observers assume.
      const Vec3 a_meas = Rs.transpose() * (traj_.inertial_accel(ts) - gravity_) - bias_;
      d.segment<3>(0) = Rs * v;
      d.segment<3>(3) = -w.cross(v) + a_meas + bias_ + Rs.transpose() * gravity_;
      off = 6;
    } else {
      const Vec3 iv = traj_.inertial_velocity(ts);
      v = Rs.transpose() * iv;
      d.segment<3>(0) = iv;
    }
    const int nf = static_cast<int>((y.size() - off) / 3);
    for (int i = 0; i < nf; ++i) {
      const Vec3 z = y.segment<3>(off + 3 * i);
      d.segment<3>(off + 3 * i) = -w.cross(z) - v;
    }
    return d;
  };

  Eigen::VectorXd y = pack(s, accel_mode);
  y = rk4_step(
      y, h, [&](const Eigen::VectorXd& q) { return rhs(q, t0, rot.R0); },
      [&](const Eigen::VectorXd& q) { return rhs(q, t0 + 0.5 * h, rot.Rm); },
      [&](const Eigen::VectorXd& q) { return rhs(q, t0 + h, rot.R1); });

  RobotTruth out = s;
  out.R = Rot3::from_matrix(rot.R1);
  unpack(y, accel_mode, out);
  if (!accel_mode) {
    out.v = out.R.transposed() * traj_.inertial_velocity(t0 + h);
  }
  if (check_range) {
    for (std::size_t i = 0; i < out.features_body.size(); ++i) {
      if (out.features_body[i].norm() < r_min_) {
        throw MinRangeViolation(t0 + h, static_cast<int>(i), out.features_body[i].norm());
      }
    }
  }
  return out;
}

void TruthSimulator::advance(double dt) {
  truth_ = integrate(truth_, t_, dt, true);
  t_ += dt;
  ++steps_;
  if (steps_ % 1000 == 0) {
    truth_.R = truth_.R.renormalized();
  }
}

RobotTruth TruthSimulator::probe_half(double dt) const {
  return integrate(truth_, t_, 0.5 * dt, false);
}

Vec3 TruthSimulator::measured_accel(const RobotTruth& s, double t) const {
  return s.R.transposed() * (traj_.inertial_accel(t) - gravity_) - bias_;
}

MeasurementSynthesizer::MeasurementSynthesizer(const NoiseSpec& noise, std::uint64_t seed,
                                               int n_features, bool noise_free)
    : noise_(noise), noise_free_(noise_free || !noise.any()), gyro_(seed, "gyro"),
      accel_(seed, "accel") {
  bearing_.reserve(static_cast<std::size_t>(n_features));
  for (int i = 0; i < n_features; ++i) {
    bearing_.emplace_back(seed, "bearing" + std::to_string(i));
  }
}

MeasurementSample MeasurementSynthesizer::sample(const TruthSimulator& sim, const RobotTruth& s,
                                                 double t) {
  MeasurementSample m;
  m.t = t;
  m.imu.omega = sim.trajectory().omega(t);
  if (sim.trajectory().mode() == DriveMode::kAcceleration) {
    m.imu.accel = sim.measured_accel(s, t);
  }
  m.velocity = s.v;
  m.bearings.reserve(s.features_body.size());
  for (std::size_t i = 0; i < s.features_body.size(); ++i) {
    m.bearings.push_back(UnitBearing::from_vector(s.features_body[i]).vec());
  }
  if (!noise_free_) {
    m.imu.omega += noise_.sigma_gyro * gyro_.next_vec3();
    if (sim.trajectory().mode() == DriveMode::kAcceleration) {
      m.imu.accel += noise_.sigma_accel * accel_.next_vec3();
    }
    for (std::size_t i = 0; i < m.bearings.size(); ++i) {
      const Vec3 noisy = m.bearings[i] + noise_.sigma_bearing * bearing_[i].next_vec3();
      m.bearings[i] = UnitBearing::from_vector(noisy).vec();
    }
  }
  return m;
}

}  // namespace rpebo
