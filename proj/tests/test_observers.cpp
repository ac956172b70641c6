#include <doctest.h>

#include <cmath>

#include "rpebo/observers.hpp"
#include "test_helpers.hpp"

using namespace rpebo;
using namespace rpebo_test;

namespace {

const Vec3 kGravity(0.0, 0.0, 9.81);
const Vec3 kFeature(-2.0, 1.0, 3.0);
const Vec3 kBias(0.09, 0.10, 0.11);

// Straight-line approach: constant bearing, so the regressor never excites.
Trajectory straight_line() {
  std::vector<std::array<double, 7>> rows = {{0, 0, 0, 1, 0, 0, 0},
                                             {3, 0, 0, 1, 0, 0, 0}};
  return Trajectory::tabulated(DriveMode::kVelocity, rows, Vec3::Zero(), Vec3(0, 0, 1));
}

template <class Obs>
void drive_observer(Obs& obs, TruthSimulator& sim, MeasurementSynthesizer& synth,
                    double dt, long n) {
  MeasurementSample prev = synth.sample(sim, sim.state(), sim.time());
  for (long k = 0; k < n; ++k) {
    const double t0 = sim.time();
    const RobotTruth mid = sim.probe_half(dt);
    const MeasurementSample mm = synth.sample(sim, mid, t0 + 0.5 * dt);
    sim.advance(dt);
    const MeasurementSample m1 = synth.sample(sim, sim.state(), t0 + dt);
    obs.step(prev, mm, m1, dt);
    prev = m1;
  }
}

}  // namespace

TEST_CASE("gradient observer without excitation only integrates the range rate") {
  TruthSimulator sim(straight_line(), {Vec3(0, 0, 5)}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  GradientObserver obs({1.0, 50.0, 0.0, 0.0}, first);
  const double r0_err = std::abs(obs.r_hat() - sim.state().range(0));
  drive_observer(obs, sim, synth, 1e-3, 2000);
  CHECK(obs.phi().norm() < 1e-12);
  CHECK(std::abs(obs.r_hat() - sim.state().range(0)) ==
        doctest::Approx(r0_err).epsilon(1e-9));
}

TEST_CASE("gradient observer converges under persistent excitation") {
  TruthSimulator sim(Trajectory::pe(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  GradientObserver obs({1.0, 50.0, 0.0, 0.0}, first);
  double prev_err = std::abs(obs.r_hat() - sim.state().range(0));
  double max_growth = 0.0;
  MeasurementSample prev = first;
  const double dt = 1e-3;
  run_measurements(sim, synth, dt, 20000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator& s) {
                     obs.step(m0, mm, m1, dt);
                     const double err = std::abs(obs.r_hat() - s.state().range(0));
                     max_growth = std::max(max_growth, err - prev_err);
                     prev_err = err;
                   });
  (void)prev;
  // Exact-zero filter initialization makes the range error monotone.
  CHECK(max_growth < 1e-12);
  CHECK((obs.z_hat() - sim.state().features_body[0]).norm() < 1e-2);
}

TEST_CASE("pebo parameter freezes without excitation") {
  TruthSimulator sim(straight_line(), {Vec3(0, 0, 5)}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  PeboObserver::Params p;
  p.theta0 = 0.7;
  PeboObserver obs(p, first);
  drive_observer(obs, sim, synth, 1e-3, 2000);
  CHECK(obs.theta_hat() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(obs.omega() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(obs.zeta() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pebo accumulated regression identity holds along the ie run") {
  TruthSimulator sim(Trajectory::ie_velocity(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  PeboObserver obs({}, first);
  const double dt = 1e-3;
  double max_residual = 0.0;
  double prev_omega = 1.0;
  bool omega_ok = true;
  run_measurements(sim, synth, dt, 20000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator& s) {
                     obs.step(m0, mm, m1, dt);
                     const double theta = s.state().range(0) - obs.xi();
                     max_residual = std::max(
                         max_residual,
                         std::abs(obs.zeta() - (1.0 - obs.omega()) * theta));
                     omega_ok = omega_ok && obs.omega() > 0.0 &&
                                obs.omega() <= prev_omega + 1e-15;
                     prev_omega = obs.omega();
                   });
  CHECK(max_residual < 1e-5);
  CHECK(omega_ok);
}

TEST_CASE("pebo converges where the gradient observer plateaus") {
  TruthSimulator sim_a(Trajectory::ie_velocity(), {kFeature}, kGravity, Vec3::Zero());
  TruthSimulator sim_b(Trajectory::ie_velocity(), {kFeature}, kGravity, Vec3::Zero());
  auto synth_a = noise_free_synth(1);
  auto synth_b = noise_free_synth(1);
  const MeasurementSample first = synth_a.sample(sim_a, sim_a.state(), 0.0);
  GradientObserver grad({1.0, 50.0, 0.0, 0.0}, first);
  PeboObserver pebo({}, first);
  drive_observer(grad, sim_a, synth_a, 1e-3, 20000);
  drive_observer(pebo, sim_b, synth_b, 1e-3, 20000);
  const double err_grad = (grad.z_hat() - sim_a.state().features_body[0]).norm();
  const double err_pebo = (pebo.z_hat() - sim_b.state().features_body[0]).norm();
  CHECK(err_pebo < 1e-3);
  CHECK(err_grad > 10.0 * err_pebo);
}

TEST_CASE("pebo excitation lift keeps one minus omega above the measured level") {
  TruthSimulator sim(Trajectory::ie_velocity(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  PeboObserver obs({}, first);
  const double dt = 1e-3;
  const double delta = 1e-3;
  double t_star = -1.0;
  double level = 0.0;
  bool lift_ok = true;
  run_measurements(sim, synth, dt, 20000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator& s) {
                     obs.step(m0, mm, m1, dt);
                     if (t_star < 0.0 && obs.excitation_integral() >= delta) {
                       t_star = s.time();
                       level = obs.excitation_integral();
                     }
                     if (t_star >= 0.0) {
                       lift_ok = lift_ok &&
                                 (1.0 - obs.omega()) >= (1.0 - std::exp(-level)) - 1e-12;
                     }
                   });
  CHECK(t_star > 0.0);
  CHECK(t_star < 4.0);
  CHECK(lift_ok);
}

TEST_CASE("pebo log omega equals the negative excitation integral") {
  TruthSimulator sim(Trajectory::ie_velocity(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  PeboObserver obs({}, first);
  const double dt = 1e-3;
  double max_gap = 0.0;
  run_measurements(sim, synth, dt, 20000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator&) {
                     obs.step(m0, mm, m1, dt);
                     max_gap = std::max(max_gap, std::abs(std::log(obs.omega()) +
                                                          obs.excitation_integral()));
                   });
  CHECK(max_gap < 1e-5);
}

TEST_CASE("mixing estimator freezes without data") {
  DremEstimator est(4, {0.4, 100.0, 500.0}, Eigen::Vector4d(1, 2, 3, 4));
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(4, 3);
  const Eigen::VectorXd yn = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < 1000; ++k) {
    est.step(psi, yn, psi, yn, psi, yn, 1e-3);
  }
  CHECK((est.theta_hat() - Eigen::Vector4d(1, 2, 3, 4)).norm() == 0.0);
  CHECK(est.omega() == 1.0);
  CHECK(est.extended().Phi.norm() == 0.0);
}

TEST_CASE("mixing estimator recovers the parameter from a synthetic regression") {
  // y_n = psi^T theta with a rotating regressor: excitation is ample, theta
  // should be recovered to high accuracy.
  const int n = 3;
  const Eigen::Vector3d theta(1.5, -0.7, 0.3);
  DremEstimator est(n, {0.5, 50.0, 10.0}, Eigen::Vector3d::Zero());
  const double dt = 1e-3;
  auto psi_at = [&](double t) {
    Eigen::MatrixXd psi(n, 1);
    psi << std::sin(t), std::cos(2.0 * t), 0.5 + std::sin(0.5 * t);
    return psi;
  };
  for (int k = 0; k < 30000; ++k) {
    const double t = k * dt;
    const auto p0 = psi_at(t), pm = psi_at(t + dt / 2), p1 = psi_at(t + dt);
    est.step(p0, p0.transpose() * theta, pm, pm.transpose() * theta, p1,
             p1.transpose() * theta, dt);
  }
  CHECK((est.theta_hat() - theta).norm() < 1e-6);
}

TEST_CASE("mixing estimator keeps the accumulated identity exactly") {
  // zeta = (1 - omega) theta is preserved by the exponential update.
  const int n = 2;
  const Eigen::Vector2d theta(2.0, -1.0);
  DremEstimator est(n, {0.3, 20.0, 5.0}, Eigen::Vector2d::Zero());
  const double dt = 1e-3;
  auto psi_at = [&](double t) {
    Eigen::MatrixXd psi(n, 1);
    psi << 1.0 + std::sin(t), std::cos(3.0 * t);
    return psi;
  };
  double max_res = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double t = k * dt;
    const auto p0 = psi_at(t), pm = psi_at(t + dt / 2), p1 = psi_at(t + dt);
    est.step(p0, p0.transpose() * theta, pm, pm.transpose() * theta, p1,
             p1.transpose() * theta, dt);
    max_res = std::max(
        max_res,
        (est.zeta() - (1.0 - est.omega()) * theta).lpNorm<Eigen::Infinity>());
  }
  CHECK(max_res < 1e-6);
}

TEST_CASE("reconstruction splits the extended state and rejects bad dimensions") {
  Eigen::VectorXd w(10);
  w << 2.0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Vec3 y(0, 0, 1);
  const PvEstimate e = reconstruct_pv(w, y);
  CHECK(e.r_hat == 2.0);
  CHECK((e.z_hat - Vec3(0, 0, 2)).norm() == 0.0);
  CHECK((e.v_hat - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK((e.ba_hat - Vec3(4, 5, 6)).norm() == 0.0);
  CHECK((e.gc_hat - Vec3(7, 8, 9)).norm() == 0.0);
  CHECK_THROWS_AS(reconstruct_pv(Eigen::VectorXd::Zero(9), y), std::invalid_argument);

  Eigen::VectorXd wn(12);
  wn << 1, 2, 3, 4, 5, 6, 7, 8, 9, 1.5, 2.5, 3.5;
  const std::vector<Vec3> ys = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const NavEstimate ne = reconstruct_nav(wn, ys);
  CHECK(ne.r_hat(1) == 2.5);
  CHECK((ne.z_hat[1] - Vec3(0, 2.5, 0)).norm() == 0.0);
  CHECK_THROWS_AS(reconstruct_nav(Eigen::VectorXd::Zero(10), ys), std::invalid_argument);
}

TEST_CASE("position-velocity observer converges with biased measurements") {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  PvObserver obs({}, first);  // paper gains: alpha 2, gamma 100, rho 0.4, kp 500
  drive_observer(obs, sim, synth, 1e-3, 35000);
  const PvEstimate e = obs.estimate();
  CHECK((e.z_hat - sim.state().features_body[0]).norm() < 1e-2);
  CHECK((e.v_hat - sim.state().v).norm() < 1e-2);
  CHECK((e.ba_hat - kBias).norm() < 1e-2);
  CHECK((e.gc_hat - kGravity).norm() < 1e-2);
}

TEST_CASE("navigation observer estimates pose from three landmarks") {
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  TruthSimulator sim(Trajectory::ie_acceleration(), landmarks, kGravity, kBias);
  auto synth = noise_free_synth(3);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  NavObserver::Params p;  // alpha 1, kp 1000 with unity pose gains
  NavObserver obs(p, landmarks, first);
  drive_observer(obs, sim, synth, 1e-3, 30000);
  CHECK((obs.R_hat().matrix() - sim.state().R.matrix()).norm() < 1e-2);
  CHECK((obs.x_hat() - sim.state().x).norm() < 1e-2);
  const Mat3 qc = obs.Qc_hat().matrix();
  CHECK((qc.transpose() * qc - Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("navigation observer stays on the rotation manifold from a flipped start") {
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  TruthSimulator sim(Trajectory::ie_acceleration(), landmarks, kGravity, kBias);
  auto synth = noise_free_synth(3);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  NavObserver::Params p;
  p.qc0 = Rot3::from_axis_angle(Vec3(1, 0, 0), M_PI);
  NavObserver obs(p, landmarks, first);
  const double dt = 1e-3;
  double worst_ortho = 0.0;
  bool finite = true;
  run_measurements(sim, synth, dt, 30000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator&) {
                     obs.step(m0, mm, m1, dt);
                     const Mat3 qc = obs.Qc_hat().matrix();
                     worst_ortho = std::max(
                         worst_ortho,
                         (qc.transpose() * qc - Mat3::Identity()).norm());
                     finite = finite && obs.x_hat().allFinite() && qc.allFinite();
                   });
  CHECK(worst_ortho < 1e-9);
  CHECK(finite);
}

TEST_CASE("position stage decays like the total position gain") {
  // With perfect attitude, ranges and velocity, the position error contracts
  // at the sum of the per-landmark gains.
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  std::vector<std::array<double, 7>> rows = {{0, 0, 0, 0, 0, 0, 0},
                                             {10, 0, 0, 0, 0, 0, 0}};
  const Trajectory traj =
      Trajectory::tabulated(DriveMode::kAcceleration, rows, Vec3(1, 0, 0), Vec3::Zero());
  TruthSimulator sim(traj, landmarks, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(3);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);

  NavObserver::Params p;
  // Pin the parameter estimate at the truth so only the pose stage moves.
  Eigen::VectorXd theta0(12);
  theta0.segment<3>(0) = sim.state().v;
  theta0.segment<3>(3) = Vec3::Zero();
  theta0.segment<3>(6) = kGravity;
  for (int i = 0; i < 3; ++i) theta0(9 + i) = sim.state().range(i);
  p.theta0 = theta0;
  p.gamma = 0.0;  // hold theta at theta0
  p.x0 = sim.state().x + Vec3(0.5, -0.3, 0.2);
  NavObserver obs(p, landmarks, first);

  const double d0 = (obs.x_hat() - sim.state().x).norm();
  const double T = 1.0;
  drive_observer(obs, sim, synth, 1e-3, 1000);
  const double d1 = (obs.x_hat() - sim.state().x).norm();
  const double sigma_total = 3.0;  // three landmarks, unit gain each
  const double fitted = -std::log(d1 / d0) / T;
  CHECK(std::abs(fitted - sigma_total) < 0.05 * sigma_total);
}

TEST_CASE("gradient range clamp pins the estimate") {
  TruthSimulator sim(Trajectory::pe(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  GradientObserver obs({1.0, 50.0, 0.0, 0.0}, first);
  obs.clamp_range(4.2);
  CHECK(obs.r_hat() == 4.2);
}
