#include "rpebo/lie3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpebo {

Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
      -a.y(), a.x(), 0.0;
  return m;
}

Mat3 projector(const Vec3& x) {
  const double n2 = x.squaredNorm();
  if (n2 <= 0.0) {
    throw std::domain_error("projector: zero vector has no projector");
  }
  return Mat3::Identity() - (x * x.transpose()) / n2;
}

Mat3 exp_so3(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 W = hat(w);
  if (theta2 < 1e-16) {
    // Second-order Taylor; error O(theta^3) is below machine precision here.
    return Mat3::Identity() + W + 0.5 * (W * W);
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * W +
         ((1.0 - std::cos(theta)) / theta2) * (W * W);
}

Vec3 dexpinv(const Vec3& u, const Vec3& v) {
  const Vec3 uv = u.cross(v);
  return v - 0.5 * uv + (1.0 / 12.0) * u.cross(uv);
}

Rot3 Rot3::from_matrix(const Mat3& m) {
  Rot3 r(m);
  if (!r.is_valid()) {
    throw std::domain_error("Rot3: matrix is not a rotation within tolerance");
  }
  return r;
}

Rot3 Rot3::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n <= 0.0) {
    throw std::domain_error("Rot3: zero axis");
  }
  return Rot3::exp((angle / n) * axis);
}

Rot3 Rot3::renormalized() const {
  Eigen::JacobiSVD<Mat3> svd(m_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = -1.0;
    r = svd.matrixU() * d * svd.matrixV().transpose();
  }
  return Rot3(r);
}

bool Rot3::is_valid(double tol) const {
  const double ortho = (m_.transpose() * m_ - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(m_.determinant() - 1.0) <= tol;
}

double so3_distance(const Rot3& R) {
  const double radicand = (3.0 - R.matrix().trace()) / 4.0;
  return std::sqrt(std::clamp(radicand, 0.0, 1.0));
}

UnitBearing UnitBearing::from_vector(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    throw std::domain_error("UnitBearing: vector too small to normalize");
  }
  return UnitBearing(v / n);
}

Rot3 integrate_rotation(const Rot3& R, const Vec3& omega, double dt) {
  return R * Rot3::exp(omega * dt);
}

Vec3 body_rotation_increment(const Vec3& w0, const Vec3& wm, const Vec3& w1, double h) {
  // For Rdot = R hat(w), the local coordinate sigma obeys
  // sigma_dot = dexpinv(-sigma, w).
  const Vec3 f1 = w0;
  const Vec3 f2 = dexpinv(-(0.5 * h) * f1, wm);
  const Vec3 f3 = dexpinv(-(0.5 * h) * f2, wm);
  const Vec3 f4 = dexpinv(-h * f3, w1);
  return (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
}

}  // namespace rpebo
