#include "rpebo/regression.hpp"

#include "rpebo/rk4.hpp"

namespace rpebo {

namespace {

// proj(y) v for unit y, written out to avoid forming the 3x3 projector.
inline Vec3 project_out(const Vec3& y, const Vec3& v) { return v - y * y.dot(v); }

}  // namespace

// ---------------------------------------------------------------------------
// ScalarRegressor

ScalarRegressor::ScalarRegressor(double alpha, const Vec3& y0, double xi0) : alpha_(alpha) {
  state_.xi = xi0;
  state_.wash_y = alpha * y0;  // exact washout initialization
}

Vec3 ScalarRegressor::phi(const State& s, const Vec3& y) const {
  return -s.wash_y + alpha_ * y + alpha_ * s.lag_wy;
}

Vec3 ScalarRegressor::y_r(const State& s, const Vec3& y) const {
  return -s.lag_reg - phi(s, y) * s.xi;
}

ScalarRegressor::State ScalarRegressor::deriv(const State& s, const VelocityInput& in) const {
  const Vec3 ph = phi(s, in.y);
  State d;
  d.xi = -in.y.dot(in.v);
  d.wash_y = -alpha_ * s.wash_y + (alpha_ * alpha_) * in.y;
  d.lag_wy = -alpha_ * s.lag_wy + in.omega.cross(in.y);
  d.lag_reg = -alpha_ * s.lag_reg + alpha_ * project_out(in.y, in.v) + in.y.dot(in.v) * ph;
  return d;
}

void ScalarRegressor::step(const VelocityInput& in0, const VelocityInput& inm,
                           const VelocityInput& in1, double dt) {
  state_ = rk4_step(
      state_, dt, [&](const State& s) { return deriv(s, in0); },
      [&](const State& s) { return deriv(s, inm); },
      [&](const State& s) { return deriv(s, in1); });
}

// ---------------------------------------------------------------------------
// MatrixExtension

MatrixExtension::State MatrixExtension::State::operator+(const State& o) const {
  State r;
  r.xi = xi + o.xi;
  r.Psi = Psi + o.Psi;
  r.wash_y = wash_y + o.wash_y;
  r.lag_wy = lag_wy + o.lag_wy;
  r.lag_yn = lag_yn + o.lag_yn;
  r.lag_psi = lag_psi + o.lag_psi;
  return r;
}

MatrixExtension::State operator*(double c, const MatrixExtension::State& s) {
  MatrixExtension::State r;
  r.xi = c * s.xi;
  r.Psi = c * s.Psi;
  r.wash_y = c * s.wash_y;
  r.lag_wy = c * s.lag_wy;
  r.lag_yn = c * s.lag_yn;
  r.lag_psi = c * s.lag_psi;
  return r;
}

MatrixExtension::MatrixExtension(double alpha, const Vec3& y0) : alpha_(alpha) {
  state_.wash_y = alpha * y0;
}

Vec3 MatrixExtension::phi(const State& s, const Vec3& y) const {
  return -s.wash_y + alpha_ * y + alpha_ * s.lag_wy;
}

Vec3 MatrixExtension::y_n(const State& s, const Vec3& y) const {
  return -phi(s, y) * s.xi(0) - s.lag_yn;
}

MatrixExtension::PsiOut MatrixExtension::psi(const State& s, const Vec3& y) const {
  PsiOut out = (phi(s, y) * s.Psi.row(0)).transpose();
  out += s.lag_psi.transpose();
  return out;
}

MatrixExtension::State MatrixExtension::deriv(const State& s, const ImuInput& in) const {
  State d;

  const Vec3 xi_v = s.xi.segment<3>(1);
  const Vec3 xi_b = s.xi.segment<3>(4);
  const Vec3 xi_g = s.xi.segment<3>(7);
  d.xi.setZero();
  d.xi(0) = -in.y.dot(xi_v);
  d.xi.segment<3>(1) = -in.omega.cross(xi_v) + xi_b + in.Q.transpose() * xi_g + in.accel;

  const auto Psi_v = s.Psi.middleRows<3>(1);
  d.Psi.setZero();
  d.Psi.row(0) = -in.y.transpose() * Psi_v;
  d.Psi.middleRows<3>(1) =
      -hat(in.omega) * Psi_v + s.Psi.middleRows<3>(4) + in.Q.transpose() * s.Psi.middleRows<3>(7);

  const Vec3 ph = phi(s, in.y);
  d.wash_y = -alpha_ * s.wash_y + (alpha_ * alpha_) * in.y;
  d.lag_wy = -alpha_ * s.lag_wy + in.omega.cross(in.y);

  // (phi y^T + alpha proj(y)) applied to the velocity rows of xi and Psi.
  const Mat3 mix = ph * in.y.transpose() + alpha_ * (Mat3::Identity() - in.y * in.y.transpose());
  d.lag_yn = -alpha_ * s.lag_yn + mix * xi_v;
  d.lag_psi = -alpha_ * s.lag_psi + mix * Psi_v;
  return d;
}

void MatrixExtension::step(const ImuInput& in0, const ImuInput& inm, const ImuInput& in1,
                           double dt) {
  state_ = rk4_step(
      state_, dt, [&](const State& s) { return deriv(s, in0); },
      [&](const State& s) { return deriv(s, inm); },
      [&](const State& s) { return deriv(s, in1); });
}

// ---------------------------------------------------------------------------
// NavExtension

NavExtension::State NavExtension::State::operator+(const State& o) const {
  State r;
  r.xi = xi + o.xi;
  r.Psi = Psi + o.Psi;
  r.wash_y = wash_y + o.wash_y;
  r.lag_wy = lag_wy + o.lag_wy;
  r.lag_yn = lag_yn + o.lag_yn;
  r.lag_psi = lag_psi + o.lag_psi;
  return r;
}

NavExtension::State operator*(double c, const NavExtension::State& s) {
  NavExtension::State r;
  r.xi = c * s.xi;
  r.Psi = c * s.Psi;
  r.wash_y = c * s.wash_y;
  r.lag_wy = c * s.lag_wy;
  r.lag_yn = c * s.lag_yn;
  r.lag_psi = c * s.lag_psi;
  return r;
}

NavExtension::NavExtension(double alpha, const std::vector<Vec3>& y0)
    : alpha_(alpha), n_(static_cast<int>(y0.size())) {
  const int d = dim();
  state_.xi = Eigen::VectorXd::Zero(d);
  state_.Psi = Eigen::MatrixXd::Identity(d, d);
  state_.wash_y.resize(3, n_);
  for (int i = 0; i < n_; ++i) {
    state_.wash_y.col(i) = alpha * y0[static_cast<std::size_t>(i)];
  }
  state_.lag_wy = Eigen::MatrixXd::Zero(3, n_);
  state_.lag_yn = Eigen::VectorXd::Zero(3 * n_);
  state_.lag_psi = Eigen::MatrixXd::Zero(3 * n_, d);
}

Vec3 NavExtension::phi(const State& s, int i, const Vec3& y_i) const {
  return -s.wash_y.col(i) + alpha_ * y_i + alpha_ * s.lag_wy.col(i);
}

Eigen::VectorXd NavExtension::y_n(const State& s, const std::vector<Vec3>& y) const {
  Eigen::VectorXd out(3 * n_);
  for (int i = 0; i < n_; ++i) {
    const Vec3 ph = phi(s, i, y[static_cast<std::size_t>(i)]);
    out.segment<3>(3 * i) = -ph * s.xi(9 + i) - s.lag_yn.segment<3>(3 * i);
  }
  return out;
}

Eigen::MatrixXd NavExtension::psi(const State& s, const std::vector<Vec3>& y) const {
  Eigen::MatrixXd rows(3 * n_, dim());
  for (int i = 0; i < n_; ++i) {
    const Vec3 ph = phi(s, i, y[static_cast<std::size_t>(i)]);
    rows.middleRows<3>(3 * i) = ph * s.Psi.row(9 + i);
  }
  rows += s.lag_psi;
  return rows.transpose();
}

NavExtension::State NavExtension::deriv(const State& s, const NavInput& in) const {
  State d;
  const int dm = dim();

  const Vec3 xi_v = s.xi.segment<3>(0);
  const Vec3 xi_b = s.xi.segment<3>(3);
  const Vec3 xi_g = s.xi.segment<3>(6);
  d.xi = Eigen::VectorXd::Zero(dm);
  d.xi.segment<3>(0) = -in.omega.cross(xi_v) + xi_b + in.Q.transpose() * xi_g + in.accel;

  const auto Psi_v = s.Psi.topRows<3>();
  d.Psi = Eigen::MatrixXd::Zero(dm, dm);
  d.Psi.topRows<3>() =
      -hat(in.omega) * Psi_v + s.Psi.middleRows<3>(3) + in.Q.transpose() * s.Psi.middleRows<3>(6);

  d.wash_y.resize(3, n_);
  d.lag_wy.resize(3, n_);
  d.lag_yn.resize(3 * n_);
  d.lag_psi.resize(3 * n_, dm);
  for (int i = 0; i < n_; ++i) {
    const Vec3& yi = in.y[static_cast<std::size_t>(i)];
    d.xi(9 + i) = -yi.dot(xi_v);
    d.Psi.row(9 + i) = -yi.transpose() * Psi_v;

    const Vec3 ph = phi(s, i, yi);
    d.wash_y.col(i) = -alpha_ * s.wash_y.col(i) + (alpha_ * alpha_) * yi;
    d.lag_wy.col(i) = -alpha_ * s.lag_wy.col(i) + in.omega.cross(yi);

    const Mat3 mix = ph * yi.transpose() + alpha_ * (Mat3::Identity() - yi * yi.transpose());
    d.lag_yn.segment<3>(3 * i) = -alpha_ * s.lag_yn.segment<3>(3 * i) + mix * xi_v;
    d.lag_psi.middleRows<3>(3 * i) = -alpha_ * s.lag_psi.middleRows<3>(3 * i) + mix * Psi_v;
  }
  return d;
}

void NavExtension::step(const NavInput& in0, const NavInput& inm, const NavInput& in1,
                        double dt) {
  state_ = rk4_step(
      state_, dt, [&](const State& s) { return deriv(s, in0); },
      [&](const State& s) { return deriv(s, inm); },
      [&](const State& s) { return deriv(s, in1); });
}

}  // namespace rpebo
