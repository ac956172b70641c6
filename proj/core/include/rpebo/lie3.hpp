#pragma once

#include <Eigen/Dense>

namespace rpebo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix of a, so that hat(a) * b == a x b.
Mat3 hat(const Vec3& a);

/// Orthogonal projector onto the plane normal to x: I - x x^T / |x|^2.
/// Throws std::domain_error for |x| == 0.
Mat3 projector(const Vec3& x);

/// Rodrigues closed form of the matrix exponential of hat(w).
Mat3 exp_so3(const Vec3& w);

/// Inverse right-trivialized derivative of exp on so(3), truncated at the
/// third-order term. Accurate to O(|u|^4), plenty for |u| ~ |w| * dt.
Vec3 dexpinv(const Vec3& u, const Vec3& v);

/// Rotation matrix with checked construction: R^T R = I and det R = 1
/// within tolerance.
class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}

  /// Validates orthonormality (1e-9 Frobenius) and det (1e-9).
  /// Throws std::domain_error otherwise.
  static Rot3 from_matrix(const Mat3& m);
  static Rot3 from_axis_angle(const Vec3& axis, double angle);
  static Rot3 exp(const Vec3& w) { return Rot3(exp_so3(w)); }

  const Mat3& matrix() const { return m_; }
  Rot3 transposed() const { return Rot3(m_.transpose()); }

  Rot3 operator*(const Rot3& o) const { return Rot3(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Nearest rotation in the Frobenius sense (polar projection via SVD).
  Rot3 renormalized() const;
  bool is_valid(double tol = 1e-9) const;

 private:
  explicit Rot3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Normalized distance to the identity: sqrt(tr(I - R) / 4), in [0, 1].
/// The radicand is clamped against roundoff.
double so3_distance(const Rot3& R);

/// Unit-norm bearing vector, |y| = 1 within 1e-12.
class UnitBearing {
 public:
  /// Normalizes v; throws std::domain_error for |v| below 1e-12.
  static UnitBearing from_vector(const Vec3& v);
  const Vec3& vec() const { return y_; }

 private:
  explicit UnitBearing(const Vec3& y) : y_(y) {}
  Vec3 y_;
};

/// One exact step of Rdot = R hat(w) for constant w: R * exp(hat(w * dt)).
Rot3 integrate_rotation(const Rot3& R, const Vec3& omega, double dt);

/// Fourth-order rotation increment for Rdot = R hat(w(t)) over [t, t+h],
/// from samples of w at t, t + h/2 and t + h (Munthe-Kaas RK4). The increment
/// depends only on the samples, so two rotations propagated with the same
/// increment keep their relative rotation exactly constant.
Vec3 body_rotation_increment(const Vec3& w0, const Vec3& wm, const Vec3& w1, double h);

inline Rot3 integrate_rotation_rk4(const Rot3& R, const Vec3& w0, const Vec3& wm,
                                   const Vec3& w1, double h) {
  return R * Rot3::exp(body_rotation_increment(w0, wm, w1, h));
}

}  // namespace rpebo
