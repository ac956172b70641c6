#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "rpebo/lie3.hpp"

namespace rpebo {

enum class TrajectoryKind { kPe, kIeVelocity, kIeAcceleration, kTabulated };

/// Whether the trajectory is specified through the inertial velocity (the
/// velocity-measured estimation problem) or the inertial acceleration (the
/// IMU-only problem).
enum class DriveMode { kVelocity, kAcceleration };

/// Closed-form or tabulated robot trajectory inputs. All closed forms are
/// evaluable at any t >= 0, which the integrators rely on for stage times.
class Trajectory {
 public:
  static Trajectory pe();
  static Trajectory ie_velocity();
  static Trajectory ie_acceleration();

  /// Tabulated inputs, linearly interpolated. Each row is
  /// [t, lin_x, lin_y, lin_z, w_x, w_y, w_z] with lin the inertial velocity or
  /// acceleration depending on mode. Times must be strictly increasing.
  static Trajectory tabulated(DriveMode mode, std::vector<std::array<double, 7>> rows,
                              const Vec3& x0, const Vec3& v0);

  TrajectoryKind kind() const { return kind_; }
  DriveMode mode() const { return mode_; }

  Vec3 omega(double t) const;
  Vec3 inertial_velocity(double t) const;  // velocity mode only
  Vec3 inertial_accel(double t) const;     // acceleration mode only

  Vec3 initial_position() const { return x0_; }
  Vec3 initial_inertial_velocity() const { return v0_; }

 private:
  Trajectory() = default;

  TrajectoryKind kind_ = TrajectoryKind::kPe;
  DriveMode mode_ = DriveMode::kVelocity;
  Vec3 x0_ = Vec3::Zero();
  Vec3 v0_ = Vec3::Zero();
  std::vector<std::array<double, 7>> rows_;
};

}  // namespace rpebo
