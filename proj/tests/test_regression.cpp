#include <doctest.h>

#include <cmath>

#include "rpebo/regression.hpp"
#include "test_helpers.hpp"

using namespace rpebo;
using namespace rpebo_test;

namespace {

const Vec3 kGravity(0.0, 0.0, 9.81);
const Vec3 kFeature(-2.0, 1.0, 3.0);
const Vec3 kBias(0.09, 0.10, 0.11);

// Plain Taylor matrix exponential with scaling and squaring; oracle only.
Eigen::MatrixXd expm_oracle(Eigen::MatrixXd a) {
  int squarings = 0;
  while (a.norm() > 0.5) {
    a *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = result;
  for (int k = 1; k <= 24; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) {
    result = result * result;
  }
  return result;
}

VelocityInput vel_input(const MeasurementSample& m) {
  return VelocityInput{m.y(), m.imu.omega, m.velocity};
}

}  // namespace

TEST_CASE("scalar regressor is inert without excitation") {
  // Constant bearing, zero rates and velocity: xi frozen, phi identically
  // zero thanks to the exact washout initialization.
  const Vec3 y = Vec3(0.0, 0.6, 0.8);
  ScalarRegressor reg(1.0, y, 0.25);
  const VelocityInput in{y, Vec3::Zero(), Vec3::Zero()};
  for (int k = 0; k < 5000; ++k) {
    reg.step(in, in, in, 1e-3);
  }
  CHECK(reg.state().xi == doctest::Approx(0.25));
  CHECK(reg.phi(reg.state(), y).norm() < 1e-14);
}

TEST_CASE("scalar regression equation is exact along the noise-free pe run") {
  TruthSimulator sim(Trajectory::pe(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  ScalarRegressor reg(1.0, first.y(), 0.0);
  const double theta = sim.state().range(0);  // r(0) - xi(0)

  double max_lre = 0.0;
  double max_theta_drift = 0.0;
  const double dt = 1e-3;
  run_measurements(sim, synth, dt, 20000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator& s) {
                     reg.step(vel_input(m0), vel_input(mm), vel_input(m1), dt);
                     const Vec3 ph = reg.phi(reg.state(), m1.y());
                     const Vec3 yr = reg.y_r(reg.state(), m1.y());
                     max_lre = std::max(max_lre, (yr - ph * theta).norm());
                     max_theta_drift = std::max(
                         max_theta_drift,
                         std::abs(s.state().range(0) - reg.state().xi - theta));
                   });
  CHECK(max_lre < 1e-4);
  CHECK(max_theta_drift < 1e-6);
}

TEST_CASE("bearing rate identity holds against central differences") {
  // range * (ydot + w x y) + proj(y) v = 0, with ydot from the mid-grid
  // bearing samples straddling each node.
  TruthSimulator sim(Trajectory::pe(), {kFeature}, kGravity, Vec3::Zero());
  auto synth = noise_free_synth(1);
  const double dt = 1e-3;
  double r_node = sim.state().range(0);
  Vec3 prev_mid = Vec3::Zero();
  bool have_prev = false;
  double max_res = 0.0;
  run_measurements(sim, synth, dt, 5000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample&, const TruthSimulator& s) {
                     if (have_prev) {
                       const Vec3 ydot = (mm.y() - prev_mid) / dt;
                       const Vec3 y = m0.y();
                       const Vec3 proj_v =
                           m0.velocity - y * y.dot(m0.velocity);
                       const Vec3 res =
                           r_node * (ydot + m0.imu.omega.cross(y)) + proj_v;
                       max_res = std::max(max_res, res.norm());
                     }
                     prev_mid = mm.y();
                     have_prev = true;
                     r_node = s.state().range(0);
                   });
  CHECK(max_res < 1e-6);
}

TEST_CASE("matrix extension transition matrix matches the exponential for constant inputs") {
  const Vec3 y(0.0, 0.6, 0.8);
  MatrixExtension ext(2.0, y);
  const ImuInput in{y, Vec3::Zero(), Vec3::Zero(), Mat3::Identity()};
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    ext.step(in, in, in, dt);
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(10, 10);
  A.block<1, 3>(0, 1) = -y.transpose();
  A.block<3, 3>(1, 4) = Mat3::Identity();
  A.block<3, 3>(1, 7) = Mat3::Identity();  // Q = I
  const Eigen::MatrixXd expected = expm_oracle(A);
  CHECK((ext.state().Psi - expected).norm() < 1e-8);
}

TEST_CASE("extended state reconstruction is exact along the acceleration run") {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  MatrixExtension ext(2.0, first.y());

  Eigen::VectorXd theta(10);
  theta(0) = sim.state().range(0);
  theta.segment<3>(1) = sim.state().v;
  theta.segment<3>(4) = kBias;
  theta.segment<3>(7) = kGravity;  // auxiliary frame starts at the attitude

  Rot3 Q;
  const double dt = 1e-3;
  double max_res = 0.0;
  long steps = 0;
  run_measurements(
      sim, synth, dt, 40000,
      [&](const MeasurementSample& m0, const MeasurementSample& mm,
          const MeasurementSample& m1, const TruthSimulator& s) {
        const Mat3 Q0 = Q.matrix();
        const Mat3 Qm =
            (Q * Rot3::exp((dt / 4.0) * (m0.imu.omega + mm.imu.omega))).matrix();
        const Rot3 Q_end = Q * Rot3::exp(body_rotation_increment(
                                   m0.imu.omega, mm.imu.omega, m1.imu.omega, dt));
        auto in = [](const MeasurementSample& m, const Mat3& q) {
          return ImuInput{m.y(), m.imu.omega, m.imu.accel, q};
        };
        ext.step(in(m0, Q0), in(mm, Qm), in(m1, Q_end.matrix()), dt);
        Q = Q_end;
        if (++steps % 1000 == 0) Q = Q.renormalized();

        Eigen::VectorXd chi(10);
        chi(0) = s.state().range(0);
        chi.segment<3>(1) = s.state().v;
        chi.segment<3>(4) = kBias;
        chi.segment<3>(7) = kGravity;
        const Eigen::VectorXd rec = ext.state().xi + ext.state().Psi * theta;
        max_res = std::max(max_res, (rec - chi).lpNorm<Eigen::Infinity>());
      });
  CHECK(max_res < 1e-4);
}

TEST_CASE("vector regression rows are exact along the acceleration run") {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  auto synth = noise_free_synth(1);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  MatrixExtension ext(2.0, first.y());

  Eigen::VectorXd theta(10);
  theta(0) = sim.state().range(0);
  theta.segment<3>(1) = sim.state().v;
  theta.segment<3>(4) = kBias;
  theta.segment<3>(7) = kGravity;

  Rot3 Q;
  const double dt = 1e-3;
  double max_res = 0.0;
  run_measurements(
      sim, synth, dt, 20000,
      [&](const MeasurementSample& m0, const MeasurementSample& mm,
          const MeasurementSample& m1, const TruthSimulator&) {
        const Mat3 Q0 = Q.matrix();
        const Mat3 Qm =
            (Q * Rot3::exp((dt / 4.0) * (m0.imu.omega + mm.imu.omega))).matrix();
        const Rot3 Q_end = Q * Rot3::exp(body_rotation_increment(
                                   m0.imu.omega, mm.imu.omega, m1.imu.omega, dt));
        auto in = [](const MeasurementSample& m, const Mat3& q) {
          return ImuInput{m.y(), m.imu.omega, m.imu.accel, q};
        };
        ext.step(in(m0, Q0), in(mm, Qm), in(m1, Q_end.matrix()), dt);
        Q = Q_end;
        const Vec3 yn = ext.y_n(ext.state(), m1.y());
        const MatrixExtension::PsiOut psi = ext.psi(ext.state(), m1.y());
        max_res = std::max(max_res, (yn - psi.transpose() * theta).norm());
      });
  CHECK(max_res < 1e-4);
}

TEST_CASE("navigation extension is exact for a hovering robot") {
  // All-zero tabulated acceleration and rates from zero initial velocity: the
  // robot hovers, ranges stay constant, and the reconstruction identity must
  // hold to integration accuracy.
  std::vector<std::array<double, 7>> rows = {{0, 0, 0, 0, 0, 0, 0},
                                             {30, 0, 0, 0, 0, 0, 0}};
  const Trajectory traj =
      Trajectory::tabulated(DriveMode::kAcceleration, rows, Vec3(1, 0, 0), Vec3::Zero());
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  TruthSimulator sim(traj, landmarks, kGravity, kBias);
  auto synth = noise_free_synth(3);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  NavExtension ext(1.0, first.bearings);

  Eigen::VectorXd theta(12);
  theta.segment<3>(0) = sim.state().v;
  theta.segment<3>(3) = kBias;
  theta.segment<3>(6) = kGravity;
  for (int i = 0; i < 3; ++i) theta(9 + i) = sim.state().range(i);

  const Rot3 Q;  // zero rates: the auxiliary frame never moves
  const double dt = 1e-3;
  double max_res = 0.0;
  double max_range_drift = 0.0;
  run_measurements(sim, synth, dt, 10000,
                   [&](const MeasurementSample& m0, const MeasurementSample& mm,
                       const MeasurementSample& m1, const TruthSimulator& s) {
                     auto in = [&](const MeasurementSample& m) {
                       return NavInput{m.bearings, m.imu.omega, m.imu.accel, Q.matrix()};
                     };
                     ext.step(in(m0), in(mm), in(m1), dt);

                     Eigen::VectorXd chi(12);
                     chi.segment<3>(0) = s.state().v;
                     chi.segment<3>(3) = kBias;
                     chi.segment<3>(6) = kGravity;
                     for (int i = 0; i < 3; ++i) chi(9 + i) = s.state().range(i);
                     const Eigen::VectorXd rec =
                         ext.state().xi + ext.state().Psi * theta;
                     max_res = std::max(max_res, (rec - chi).lpNorm<Eigen::Infinity>());
                     for (int i = 0; i < 3; ++i) {
                       max_range_drift = std::max(
                           max_range_drift, std::abs(s.state().range(i) - theta(9 + i)));
                     }
                   });
  CHECK(max_res < 1e-6);
  CHECK(max_range_drift < 1e-9);
}

TEST_CASE("navigation extension reconstruction holds on the moving trajectory") {
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  TruthSimulator sim(Trajectory::ie_acceleration(), landmarks, kGravity, kBias);
  auto synth = noise_free_synth(3);
  const MeasurementSample first = synth.sample(sim, sim.state(), 0.0);
  NavExtension ext(1.0, first.bearings);

  Eigen::VectorXd theta(12);
  theta.segment<3>(0) = sim.state().v;
  theta.segment<3>(3) = kBias;
  theta.segment<3>(6) = kGravity;
  for (int i = 0; i < 3; ++i) theta(9 + i) = sim.state().range(i);

  Rot3 Q;
  const double dt = 1e-3;
  double max_res = 0.0;
  double max_lre = 0.0;
  long steps = 0;
  run_measurements(
      sim, synth, dt, 40000,
      [&](const MeasurementSample& m0, const MeasurementSample& mm,
          const MeasurementSample& m1, const TruthSimulator& s) {
        const Mat3 Q0 = Q.matrix();
        const Mat3 Qm =
            (Q * Rot3::exp((dt / 4.0) * (m0.imu.omega + mm.imu.omega))).matrix();
        const Rot3 Q_end = Q * Rot3::exp(body_rotation_increment(
                                   m0.imu.omega, mm.imu.omega, m1.imu.omega, dt));
        auto in = [](const MeasurementSample& m, const Mat3& q) {
          return NavInput{m.bearings, m.imu.omega, m.imu.accel, q};
        };
        ext.step(in(m0, Q0), in(mm, Qm), in(m1, Q_end.matrix()), dt);
        Q = Q_end;
        if (++steps % 1000 == 0) Q = Q.renormalized();

        Eigen::VectorXd chi(12);
        chi.segment<3>(0) = s.state().v;
        chi.segment<3>(3) = kBias;
        chi.segment<3>(6) = kGravity;
        for (int i = 0; i < 3; ++i) chi(9 + i) = s.state().range(i);
        const Eigen::VectorXd rec = ext.state().xi + ext.state().Psi * theta;
        max_res = std::max(max_res, (rec - chi).lpNorm<Eigen::Infinity>());

        const Eigen::VectorXd yn = ext.y_n(ext.state(), m1.bearings);
        const Eigen::MatrixXd psi = ext.psi(ext.state(), m1.bearings);
        max_lre = std::max(
            max_lre, (yn - psi.transpose() * theta).lpNorm<Eigen::Infinity>());
      });
  CHECK(max_res < 1e-4);
  CHECK(max_lre < 1e-4);
}
