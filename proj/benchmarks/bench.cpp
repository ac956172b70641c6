#include <benchmark/benchmark.h>

#include "rpebo/linalg.hpp"
#include "rpebo/observers.hpp"
#include "rpebo/trajectory.hpp"

using namespace rpebo;

namespace {

const Vec3 kGravity(0.0, 0.0, 9.81);
const Vec3 kBias(0.09, 0.10, 0.11);
const Vec3 kFeature(-2.0, 1.0, 3.0);

MeasurementSample sample_at(TruthSimulator& sim, double t) {
  MeasurementSynthesizer synth(NoiseSpec::zero(), 0,
                               static_cast<int>(sim.state().anchors.size()), true);
  return synth.sample(sim, sim.state(), t);
}

}  // namespace

static void BM_RotationExp(benchmark::State& state) {
  const Vec3 w(0.3, -0.2, 0.15);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exp_so3(w));
  }
}
BENCHMARK(BM_RotationExp);

static void BM_RotationIncrement(benchmark::State& state) {
  const Vec3 w0(0.3, -0.2, 0.15), wm(0.31, -0.19, 0.14), w1(0.32, -0.18, 0.13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(body_rotation_increment(w0, wm, w1, 1e-3));
  }
}
BENCHMARK(BM_RotationIncrement);

static void BM_TruthStep(benchmark::State& state) {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  for (auto _ : state) {
    sim.advance(1e-3);
    benchmark::DoNotOptimize(sim.state().x);
  }
}
BENCHMARK(BM_TruthStep);

static void BM_ScalarRegressorStep(benchmark::State& state) {
  TruthSimulator sim(Trajectory::pe(), {kFeature}, kGravity, Vec3::Zero());
  const MeasurementSample m = sample_at(sim, 0.0);
  ScalarRegressor reg(1.0, m.y(), 0.0);
  const VelocityInput in{m.y(), m.imu.omega, m.velocity};
  for (auto _ : state) {
    reg.step(in, in, in, 1e-3);
    benchmark::DoNotOptimize(reg.state().xi);
  }
}
BENCHMARK(BM_ScalarRegressorStep);

static void BM_MatrixExtensionStep(benchmark::State& state) {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  const MeasurementSample m = sample_at(sim, 0.0);
  MatrixExtension ext(2.0, m.y());
  const ImuInput in{m.y(), m.imu.omega, m.imu.accel, Mat3::Identity()};
  for (auto _ : state) {
    ext.step(in, in, in, 1e-3);
    benchmark::DoNotOptimize(ext.state().xi);
  }
}
BENCHMARK(BM_MatrixExtensionStep);

static void BM_DetAdjugate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(n, n);
  a = (a * a.transpose()).eval() + Eigen::MatrixXd::Identity(n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(det_adjugate(a));
  }
}
BENCHMARK(BM_DetAdjugate)->Arg(3)->Arg(10)->Arg(12);

static void BM_MixedRegressor(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd phi = Eigen::MatrixXd::Random(n, n);
  phi = (phi * phi.transpose()).eval();
  const Eigen::VectorXd y = Eigen::VectorXd::Random(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(DremEstimator::mixed_regressor(phi, y));
  }
}
BENCHMARK(BM_MixedRegressor)->Arg(10)->Arg(12);

static void BM_PvObserverStep(benchmark::State& state) {
  TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
  const MeasurementSample m = sample_at(sim, 0.0);
  PvObserver obs({}, m);
  for (auto _ : state) {
    obs.step(m, m, m, 1e-3);
    benchmark::DoNotOptimize(obs.theta_hat());
  }
}
BENCHMARK(BM_PvObserverStep);

static void BM_NavObserverStep(benchmark::State& state) {
  const std::vector<Vec3> landmarks = {Vec3(-2, 1, 3), Vec3(-2, 2, 1), Vec3(1, 1, 1)};
  TruthSimulator sim(Trajectory::ie_acceleration(), landmarks, kGravity, kBias);
  const MeasurementSample m = sample_at(sim, 0.0);
  NavObserver obs({}, landmarks, m);
  for (auto _ : state) {
    obs.step(m, m, m, 1e-3);
    benchmark::DoNotOptimize(obs.x_hat());
  }
}
BENCHMARK(BM_NavObserverStep);

// One simulated second of the full single-feature pipeline.
static void BM_PvScenarioSecond(benchmark::State& state) {
  for (auto _ : state) {
    TruthSimulator sim(Trajectory::ie_acceleration(), {kFeature}, kGravity, kBias);
    MeasurementSynthesizer synth(NoiseSpec::zero(), 0, 1, true);
    MeasurementSample prev = synth.sample(sim, sim.state(), 0.0);
    PvObserver obs({}, prev);
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k) {
      const RobotTruth mid = sim.probe_half(dt);
      const MeasurementSample mm = synth.sample(sim, mid, sim.time() + 0.5 * dt);
      sim.advance(dt);
      const MeasurementSample m1 = synth.sample(sim, sim.state(), sim.time());
      obs.step(prev, mm, m1, dt);
      prev = m1;
    }
    benchmark::DoNotOptimize(obs.theta_hat());
  }
}
BENCHMARK(BM_PvScenarioSecond)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
