#include "rpebo/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rpebo {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3Over4 = std::sqrt(3.0) / 4.0;

// Benchmark trajectory with persistent excitation.
Vec3 pe_position(double t) {
  return Vec3(std::cos(0.5 * t), 0.25 * std::sin(t), -kSqrt3Over4 * std::sin(t));
}

Vec3 pe_velocity(double t) {
  return Vec3(-0.5 * std::sin(0.5 * t), 0.25 * std::cos(t), -kSqrt3Over4 * std::cos(t));
}

Vec3 pe_omega(double t) {
  return Vec3(std::sin(0.1 + kPi), 0.5 * std::sin(2.0 * t),
              0.1 * std::sin(0.3 * t + kPi / 3.0));
}

// Same trajectory with inputs decaying exponentially after 4 s, so excitation
// is confined to a finite interval.
double ie_envelope(double t) { return t <= 4.0 ? 1.0 : std::exp(-5.0 * (t - 4.0)); }

// Acceleration-driven trajectory; inputs switch off at 20 s.
Vec3 accel_profile(double t) {
  if (t >= 20.0) {
    return Vec3::Zero();
  }
  return Vec3(-0.5 * std::cos(0.5 * t), -0.5 * std::sin(t), kSqrt3Over4 * std::sin(t));
}

Vec3 accel_omega(double t) {
  if (t >= 20.0) {
    return Vec3::Zero();
  }
  return Vec3(0.2 * std::sin(0.1 * t + kPi), 0.1 * std::sin(0.2 * t),
              0.1 * std::sin(0.3 * t + kPi / 3.0));
}

}  // namespace

Trajectory Trajectory::pe() {
  Trajectory tr;
  tr.kind_ = TrajectoryKind::kPe;
  tr.mode_ = DriveMode::kVelocity;
  tr.x0_ = pe_position(0.0);
  tr.v0_ = pe_velocity(0.0);
  return tr;
}

Trajectory Trajectory::ie_velocity() {
  Trajectory tr;
  tr.kind_ = TrajectoryKind::kIeVelocity;
  tr.mode_ = DriveMode::kVelocity;
  tr.x0_ = pe_position(0.0);
  tr.v0_ = pe_velocity(0.0);
  return tr;
}

Trajectory Trajectory::ie_acceleration() {
  Trajectory tr;
  tr.kind_ = TrajectoryKind::kIeAcceleration;
  tr.mode_ = DriveMode::kAcceleration;
  tr.x0_ = Vec3(1.0, 0.0, 0.0);
  // Continuous antiderivative of the acceleration profile at t = 0.
  tr.v0_ = Vec3(0.0, 0.5, -kSqrt3Over4);
  return tr;
}

Trajectory Trajectory::tabulated(DriveMode mode, std::vector<std::array<double, 7>> rows,
                                 const Vec3& x0, const Vec3& v0) {
  Trajectory tr;
  tr.kind_ = TrajectoryKind::kTabulated;
  tr.mode_ = mode;
  tr.rows_ = std::move(rows);
  tr.x0_ = x0;
  tr.v0_ = v0;
  if (tr.rows_.size() < 2) {
    throw std::invalid_argument("tabulated trajectory needs at least two rows");
  }
  for (std::size_t i = 1; i < tr.rows_.size(); ++i) {
    if (tr.rows_[i][0] <= tr.rows_[i - 1][0]) {
      throw std::invalid_argument("tabulated trajectory times must be strictly increasing");
    }
  }
  return tr;
}

namespace {

std::array<double, 6> interp(const std::vector<std::array<double, 7>>& rows, double t) {
  auto it = std::upper_bound(rows.begin(), rows.end(), t,
                             [](double v, const std::array<double, 7>& r) { return v < r[0]; });
  if (it == rows.begin()) {
    it = rows.begin() + 1;
  }
  if (it == rows.end()) {
    it = rows.end() - 1;
  }
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = std::clamp((t - lo[0]) / (hi[0] - lo[0]), 0.0, 1.0);
  std::array<double, 6> out{};
  for (int i = 0; i < 6; ++i) {
    out[i] = lo[i + 1] + w * (hi[i + 1] - lo[i + 1]);
  }
  return out;
}

}  // namespace

Vec3 Trajectory::omega(double t) const {
  switch (kind_) {
    case TrajectoryKind::kPe:
      return pe_omega(t);
    case TrajectoryKind::kIeVelocity:
      return ie_envelope(t) * pe_omega(t);
    case TrajectoryKind::kIeAcceleration:
      return accel_omega(t);
    case TrajectoryKind::kTabulated: {
      const auto v = interp(rows_, t);
      return Vec3(v[3], v[4], v[5]);
    }
  }
  return Vec3::Zero();
}

Vec3 Trajectory::inertial_velocity(double t) const {
  switch (kind_) {
    case TrajectoryKind::kPe:
      return pe_velocity(t);
    case TrajectoryKind::kIeVelocity:
      return ie_envelope(t) * pe_velocity(t);
    case TrajectoryKind::kTabulated: {
      const auto v = interp(rows_, t);
      return Vec3(v[0], v[1], v[2]);
    }
    case TrajectoryKind::kIeAcceleration:
      break;
  }
  throw std::logic_error("inertial_velocity: trajectory is acceleration-driven");
}

Vec3 Trajectory::inertial_accel(double t) const {
  switch (kind_) {
    case TrajectoryKind::kIeAcceleration:
      return accel_profile(t);
    case TrajectoryKind::kTabulated: {
      const auto v = interp(rows_, t);
      return Vec3(v[0], v[1], v[2]);
    }
    case TrajectoryKind::kPe:
    case TrajectoryKind::kIeVelocity:
      break;
  }
  throw std::logic_error("inertial_accel: trajectory is velocity-driven");
}

}  // namespace rpebo
