#include "rpebo/observers.hpp"

#include <cmath>
#include <stdexcept>

#include "rpebo/rk4.hpp"

namespace rpebo {

namespace {

// Composite integration states for the observer pipelines. Each couples the
// regressor/extension with its estimator so one RK4 step advances everything
// from consistent stage values.
struct GradState {
  ScalarRegressor::State reg;
  double rhat;
  GradState operator+(const GradState& o) const { return {reg + o.reg, rhat + o.rhat}; }
  friend GradState operator*(double c, const GradState& s) {
    return {c * s.reg, c * s.rhat};
  }
};

struct PeboState {
  ScalarRegressor::State reg;
  double zeta, omega, theta, gram;
  PeboState operator+(const PeboState& o) const {
    return {reg + o.reg, zeta + o.zeta, omega + o.omega, theta + o.theta, gram + o.gram};
  }
  friend PeboState operator*(double c, const PeboState& s) {
    return {c * s.reg, c * s.zeta, c * s.omega, c * s.theta, c * s.gram};
  }
};

struct PvState {
  MatrixExtension::State ext;
  DremEstimator::Extended est;
  PvState operator+(const PvState& o) const { return {ext + o.ext, est + o.est}; }
  friend PvState operator*(double c, const PvState& s) {
    return {c * s.ext, c * s.est};
  }
};

struct NavPairState {
  NavExtension::State ext;
  DremEstimator::Extended est;
  NavPairState operator+(const NavPairState& o) const {
    return {ext + o.ext, est + o.est};
  }
  friend NavPairState operator*(double c, const NavPairState& s) {
    return {c * s.ext, c * s.est};
  }
};

struct PoseState {
  Vec3 sigma;  // local exponential coordinate of the attitude estimate
  Vec3 xh;
  PoseState operator+(const PoseState& o) const {
    return {sigma + o.sigma, xh + o.xh};
  }
  friend PoseState operator*(double c, const PoseState& s) {
    return {c * s.sigma, c * s.xh};
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// GradientObserver

GradientObserver::GradientObserver(const Params& p, const MeasurementSample& first)
    : reg_(p.alpha, first.y(), p.xi0), gamma_(p.gamma), rhat_(p.rhat0), last_y_(first.y()) {}

void GradientObserver::step(const MeasurementSample& s0, const MeasurementSample& sm,
                            const MeasurementSample& s1, double dt) {
  using S = GradState;
  auto deriv = [this](const S& s, const MeasurementSample& in) {
    const VelocityInput u{in.y(), in.imu.omega, in.velocity};
    const Vec3 ph = reg_.phi(s.reg, u.y);
    const Vec3 yr = reg_.y_r(s.reg, u.y);
    // phi*(rhat - xi) - y_r equals phi*rhat plus the filtered terms of the
    // regression, so the update vanishes whenever phi does.
    const double update = ph.dot(ph * (s.rhat - s.reg.xi) - yr);
    return S{reg_.deriv(s.reg, u), -u.y.dot(u.v) - gamma_ * update};
  };

  S s{reg_.state(), rhat_};
  s = rk4_step(
      s, dt, [&](const S& q) { return deriv(q, s0); },
      [&](const S& q) { return deriv(q, sm); }, [&](const S& q) { return deriv(q, s1); });
  reg_.set_state(s.reg);
  rhat_ = s.rhat;
  last_y_ = s1.y();
}

// ---------------------------------------------------------------------------
// PeboObserver

PeboObserver::PeboObserver(const Params& p, const MeasurementSample& first)
    : reg_(p.alpha, first.y(), p.xi0),
      p_(p),
      zeta_(p.zeta0),
      theta_(p.theta0),
      last_y_(first.y()) {}

void PeboObserver::step(const MeasurementSample& s0, const MeasurementSample& sm,
                        const MeasurementSample& s1, double dt) {
  using S = PeboState;
  auto deriv = [this](const S& s, const MeasurementSample& in) {
    const VelocityInput u{in.y(), in.imu.omega, in.velocity};
    const Vec3 ph = reg_.phi(s.reg, u.y);
    const Vec3 yr = reg_.y_r(s.reg, u.y);
    const double ph2 = ph.squaredNorm();

    S d;
    d.reg = reg_.deriv(s.reg, u);
    d.zeta = ph.dot(yr) - ph2 * s.zeta;
    d.omega = -ph2 * s.omega;
    d.gram = ph2;

    // Accumulated regression, optionally mixed with the instantaneous one.
    const double y_mix = (s.zeta - s.omega * p_.zeta0) + p_.kp_mix * ph.dot(yr);
    const double reg_mix = (1.0 - s.omega) + p_.kp_mix * ph2;
    const double err = y_mix - reg_mix * s.theta;
    d.theta = p_.gradient_flow ? p_.gamma * reg_mix * err : p_.gamma * err;
    return d;
  };

  S s{reg_.state(), zeta_, omega_, theta_, gram_};
  s = rk4_step(
      s, dt, [&](const S& q) { return deriv(q, s0); },
      [&](const S& q) { return deriv(q, sm); }, [&](const S& q) { return deriv(q, s1); });
  reg_.set_state(s.reg);
  zeta_ = s.zeta;
  omega_ = s.omega;
  theta_ = s.theta;
  gram_ = s.gram;
  last_y_ = s1.y();
}

// ---------------------------------------------------------------------------
// DremEstimator

namespace {

// (e^z - 1) / z, accurate near zero and saturating correctly for z << 0.
double phi1(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

}  // namespace

DremEstimator::DremEstimator(int n, const Params& p, const Eigen::VectorXd& theta0)
    : n_(n), p_(p) {
  if (theta0.size() != n) {
    throw std::invalid_argument("DremEstimator: theta0 dimension mismatch");
  }
  ext_.Phi = Eigen::MatrixXd::Zero(n, n);
  ext_.Y = Eigen::VectorXd::Zero(n);
  zeta_ = Eigen::VectorXd::Zero(n);
  omega_ = 1.0;
  theta_ = theta0;
}

DremEstimator::Extended DremEstimator::ext_deriv(const Extended& s,
                                                 const Eigen::MatrixXd& psi,
                                                 const Eigen::VectorXd& y_n) const {
  return {-p_.rho * s.Phi + psi * psi.transpose(), -p_.rho * s.Y + psi * y_n};
}

DremEstimator::Mixed DremEstimator::mixed_regressor(const Eigen::MatrixXd& Phi,
                                                    const Eigen::VectorXd& Y) {
  const int n = static_cast<int>(Phi.rows());
  const DetAdj da = det_adjugate(Phi);
  Mixed m;
  if (!std::isfinite(da.det) || std::abs(da.det) < 1e-300) {
    m.delta = 0.0;
    m.mixed_y = Eigen::VectorXd::Zero(n);
    return m;
  }
  m.delta = da.det;
  m.mixed_y = da.adj * Y;
  if (std::abs(m.delta) > 1e100) {
    const double s = 1e100 / std::abs(m.delta);
    m.delta *= s;
    m.mixed_y *= s;
  }
  return m;
}

void DremEstimator::mix_update(double dt, const Extended& mid) {
  const Mixed m = mixed_regressor(mid.Phi, mid.Y);
  const double d2 = m.delta * m.delta;
  const Eigen::VectorXd drive = m.delta * m.mixed_y;

  // Midpoint values of the slowly varying coefficients.
  const double omega_mid = omega_ * std::exp(-d2 * 0.5 * dt);
  const Eigen::VectorXd zeta_mid =
      std::exp(-d2 * 0.5 * dt) * zeta_ + (0.5 * dt) * phi1(-d2 * 0.5 * dt) * drive;

  const double kappa = (1.0 - omega_mid) + p_.kp * d2;
  const Eigen::VectorXd b = zeta_mid + p_.kp * drive;
  theta_ = theta_ + (p_.gamma * dt) * phi1(-p_.gamma * kappa * dt) * (b - kappa * theta_);

  omega_ *= std::exp(-d2 * dt);
  zeta_ = std::exp(-d2 * dt) * zeta_ + dt * phi1(-d2 * dt) * drive;
}

void DremEstimator::step(const Eigen::MatrixXd& psi0, const Eigen::VectorXd& yn0,
                         const Eigen::MatrixXd& psim, const Eigen::VectorXd& ynm,
                         const Eigen::MatrixXd& psi1, const Eigen::VectorXd& yn1,
                         double dt) {
  const Extended before = ext_;
  ext_ = rk4_step(
      ext_, dt, [&](const Extended& s) { return ext_deriv(s, psi0, yn0); },
      [&](const Extended& s) { return ext_deriv(s, psim, ynm); },
      [&](const Extended& s) { return ext_deriv(s, psi1, yn1); });
  mix_update(dt, 0.5 * (before + ext_));
}

// ---------------------------------------------------------------------------
// Reconstruction

PvEstimate reconstruct_pv(const Eigen::VectorXd& w, const Vec3& y) {
  if (w.size() != MatrixExtension::kDim) {
    throw std::invalid_argument("reconstruct_pv: expected a 10-dimensional state");
  }
  PvEstimate e;
  e.r_hat = w(0);
  e.z_hat = w(0) * y;
  e.v_hat = w.segment<3>(1);
  e.ba_hat = w.segment<3>(4);
  e.gc_hat = w.segment<3>(7);
  return e;
}

NavEstimate reconstruct_nav(const Eigen::VectorXd& w, const std::vector<Vec3>& y) {
  const int n = static_cast<int>(y.size());
  if (w.size() != 9 + n) {
    throw std::invalid_argument("reconstruct_nav: state dimension does not match landmarks");
  }
  NavEstimate e;
  e.v_hat = w.segment<3>(0);
  e.ba_hat = w.segment<3>(3);
  e.gc_hat = w.segment<3>(6);
  e.r_hat = w.tail(n);
  e.z_hat.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    e.z_hat.push_back(w(9 + i) * y[static_cast<std::size_t>(i)]);
  }
  return e;
}

// ---------------------------------------------------------------------------
// PvObserver

namespace {

Eigen::VectorXd default_theta0(int n) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
  t(n - 1) = 10.0;
  return t;
}

}  // namespace

PvObserver::PvObserver(const Params& p, const MeasurementSample& first)
    : ext_(p.alpha, first.y()),
      drem_(MatrixExtension::kDim, {p.rho, p.gamma, p.kp},
            p.theta0.size() == 0 ? default_theta0(MatrixExtension::kDim) : p.theta0),
      last_y_(first.y()) {}

void PvObserver::step(const MeasurementSample& s0, const MeasurementSample& sm,
                      const MeasurementSample& s1, double dt) {
  const Vec3 w0 = s0.imu.omega, wm = sm.imu.omega, w1 = s1.imu.omega;
  const Mat3 Q0 = Q_.matrix();
  const Mat3 Qm = (Q_ * Rot3::exp((dt / 4.0) * (w0 + wm))).matrix();
  const Rot3 Q_end = Q_ * Rot3::exp(body_rotation_increment(w0, wm, w1, dt));
  const Mat3 Q1 = Q_end.matrix();

  using S = PvState;
  auto deriv = [this](const S& s, const MeasurementSample& in, const Mat3& Q) {
    const ImuInput u{in.y(), in.imu.omega, in.imu.accel, Q};
    return S{ext_.deriv(s.ext, u),
             drem_.ext_deriv(s.est, ext_.psi(s.ext, u.y), ext_.y_n(s.ext, u.y))};
  };

  S s{ext_.state(), drem_.extended()};
  const DremEstimator::Extended before = s.est;
  s = rk4_step(
      s, dt, [&](const S& q) { return deriv(q, s0, Q0); },
      [&](const S& q) { return deriv(q, sm, Qm); },
      [&](const S& q) { return deriv(q, s1, Q1); });
  ext_.set_state(s.ext);
  drem_.set_extended(s.est);
  drem_.mix_update(dt, 0.5 * (before + s.est));

  Q_ = Q_end;
  if (++steps_ % 1000 == 0) {
    Q_ = Q_.renormalized();
  }
  last_y_ = s1.y();
}

PvEstimate PvObserver::estimate() const {
  const Eigen::VectorXd w = ext_.state().xi + ext_.state().Psi * drem_.theta_hat();
  return reconstruct_pv(w, last_y_);
}

double PvObserver::delta() const {
  return DremEstimator::mixed_regressor(drem_.extended().Phi, drem_.extended().Y).delta;
}

// ---------------------------------------------------------------------------
// NavObserver

NavObserver::NavObserver(const Params& p, std::vector<Vec3> anchors,
                         const MeasurementSample& first)
    : ext_(p.alpha, first.bearings),
      drem_(9 + static_cast<int>(anchors.size()), {p.rho, p.gamma, p.kp},
            p.theta0.size() == 0 ? default_theta0(9 + static_cast<int>(anchors.size()))
                                 : p.theta0),
      p_(p),
      anchors_(std::move(anchors)),
      Qc_hat_(p.qc0),
      x_hat_(p.x0),
      last_y_(first.bearings) {
  eta_.reserve(anchors_.size() - 1);
  for (std::size_t i = 0; i + 1 < anchors_.size(); ++i) {
    eta_.push_back(anchors_[i + 1] - anchors_[i]);
  }
}

Vec3 NavObserver::attitude_drive(const Eigen::VectorXd& rec, const Mat3& Qc_stage,
                                 const Mat3& Q_stage, const std::vector<Vec3>& y) const {
  const Mat3 QcQ = Qc_stage * Q_stage;
  Vec3 drive = Vec3::Zero();
  for (std::size_t i = 0; i + 1 < y.size(); ++i) {
    const Vec3 zi = rec(9 + static_cast<int>(i)) * y[i];
    const Vec3 zj = rec(10 + static_cast<int>(i)) * y[i + 1];
    drive += 0.5 * p_.k_att * eta_[i].cross(QcQ * (zj - zi));
  }
  return drive;
}

void NavObserver::step(const MeasurementSample& s0, const MeasurementSample& sm,
                       const MeasurementSample& s1, double dt) {
  const Vec3 w0 = s0.imu.omega, wm = sm.imu.omega, w1 = s1.imu.omega;
  const Mat3 Q0 = Q_.matrix();
  const Mat3 Qm = (Q_ * Rot3::exp((dt / 4.0) * (w0 + wm))).matrix();
  const Rot3 Q_end = Q_ * Rot3::exp(body_rotation_increment(w0, wm, w1, dt));
  const Mat3 Q1 = Q_end.matrix();

  // Stage 1: extension and extended regression pair (independent of the
  // parameter estimate), then the mixing update.
  using S = NavPairState;
  auto deriv = [this](const S& s, const MeasurementSample& in, const Mat3& Q) {
    const NavInput u{in.bearings, in.imu.omega, in.imu.accel, Q};
    return S{ext_.deriv(s.ext, u),
             drem_.ext_deriv(s.est, ext_.psi(s.ext, u.y), ext_.y_n(s.ext, u.y))};
  };
  const Eigen::VectorXd theta_before = drem_.theta_hat();
  const Eigen::VectorXd xi_before = ext_.state().xi;
  const Eigen::MatrixXd Psi_before = ext_.state().Psi;

  S s{ext_.state(), drem_.extended()};
  const DremEstimator::Extended est_before = s.est;
  s = rk4_step(
      s, dt, [&](const S& q) { return deriv(q, s0, Q0); },
      [&](const S& q) { return deriv(q, sm, Qm); },
      [&](const S& q) { return deriv(q, s1, Q1); });
  ext_.set_state(s.ext);
  drem_.set_extended(s.est);
  drem_.mix_update(dt, 0.5 * (est_before + s.est));

  // Stage 2: cascaded pose observer. The reconstruction inputs vary slowly,
  // so stage values come from endpoint interpolation.
  auto rec_at = [&](double tau) -> Eigen::VectorXd {
    const double a = tau / dt;
    const Eigen::VectorXd xi = (1.0 - a) * xi_before + a * ext_.state().xi;
    const Eigen::MatrixXd Psi = (1.0 - a) * Psi_before + a * ext_.state().Psi;
    const Eigen::VectorXd th = (1.0 - a) * theta_before + a * drem_.theta_hat();
    return xi + Psi * th;
  };
  const Eigen::VectorXd rec0 = rec_at(0.0);
  const Eigen::VectorXd recm = rec_at(0.5 * dt);
  const Eigen::VectorXd rec1 = rec_at(dt);

  auto pose_deriv = [&](const PoseState& ps, const Eigen::VectorXd& rec, const Mat3& Q,
                        const std::vector<Vec3>& y) {
    const Mat3 Qc_stage = exp_so3(ps.sigma) * Qc_hat_.matrix();
    const Vec3 w = attitude_drive(rec, Qc_stage, Q, y);
    PoseState d;
    // Qc_hat evolves by -w x Qc_hat; sigma is its left exponential coordinate.
    d.sigma = dexpinv(ps.sigma, -w);
    const Mat3 QcQ = Qc_stage * Q;
    Vec3 dx = QcQ * Vec3(rec.head<3>());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const Vec3 z_hat = rec(9 + static_cast<int>(i)) * y[i];
      dx += p_.sigma_pos * (anchors_[i] - ps.xh - QcQ * z_hat);
    }
    d.xh = dx;
    return d;
  };

  PoseState ps{Vec3::Zero(), x_hat_};
  ps = rk4_step(
      ps, dt, [&](const PoseState& q) { return pose_deriv(q, rec0, Q0, s0.bearings); },
      [&](const PoseState& q) { return pose_deriv(q, recm, Qm, sm.bearings); },
      [&](const PoseState& q) { return pose_deriv(q, rec1, Q1, s1.bearings); });
  Qc_hat_ = Rot3::from_matrix(exp_so3(ps.sigma) * Qc_hat_.matrix());
  x_hat_ = ps.xh;

  Q_ = Q_end;
  if (++steps_ % 1000 == 0) {
    Q_ = Q_.renormalized();
    Qc_hat_ = Qc_hat_.renormalized();
  }
  last_y_ = s1.bearings;
}

NavEstimate NavObserver::estimate() const {
  const Eigen::VectorXd w = ext_.state().xi + ext_.state().Psi * drem_.theta_hat();
  return reconstruct_nav(w, last_y_);
}

double NavObserver::delta() const {
  return DremEstimator::mixed_regressor(drem_.extended().Phi, drem_.extended().Y).delta;
}

}  // namespace rpebo
