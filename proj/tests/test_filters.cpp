#include <doctest.h>

#include <cmath>
#include <vector>

#include "rpebo/filters.hpp"
#include "rpebo/lie3.hpp"

using namespace rpebo;

namespace {

// Steps a scalar filter along u(t) on a uniform grid with half-step samples.
template <class F>
void drive(F& f, const std::function<double(double)>& u, double dt, double t_end) {
  const int n = static_cast<int>(std::llround(t_end / dt));
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    f.step(u(t), u(t + 0.5 * dt), u(t + dt), dt);
  }
}

}  // namespace

TEST_CASE("lag filter step response matches the closed form") {
  const double alpha = 1.7;
  const double c = 2.5;
  LagFilter<double> f(alpha, 0.0);
  const double dt = 1e-3;
  const double t_end = std::llround(10.0 / alpha / dt) * dt;
  drive(f, [&](double) { return c; }, dt, t_end);
  // Closed form (c/alpha)(1 - exp(-alpha t)); at t = 10/alpha the gap to the
  // steady state is c/alpha * e^-10 < 1e-4 c.
  const double expected = (c / alpha) * (1.0 - std::exp(-alpha * t_end));
  CHECK(std::abs(f.output() - expected) < 1e-10);
  CHECK(std::abs(f.output() - c / alpha) < 1e-4 * c);
}

TEST_CASE("lag filter homogeneous decay is exponential") {
  const double alpha = 1.0;
  LagFilter<double> f(alpha, 1.0);
  const double dt = 1e-3;
  drive(f, [](double) { return 0.0; }, dt, 3.0);
  CHECK(f.output() == doctest::Approx(std::exp(-3.0)).epsilon(1e-10));
}

TEST_CASE("lag filter sine steady-state amplitude is 1/sqrt(2) at alpha=1") {
  LagFilter<double> f(1.0, 0.0);
  const double dt = 1e-3;
  drive(f, [](double t) { return std::sin(t); }, dt, 30.0);
  // After 30 time constants, track the amplitude over one more period.
  double amp = 0.0;
  for (int k = 0; k < 6300; ++k) {
    const double t = 30.0 + k * dt;
    f.step(std::sin(t), std::sin(t + 0.5 * dt), std::sin(t + dt), dt);
    amp = std::max(amp, std::abs(f.output()));
  }
  CHECK(amp == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("washout of a constant is exactly zero with exact initialization") {
  const double c = 3.25;
  WashoutFilter<double> f(2.0, c);
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    f.step(c, c, c, dt);
    CHECK(std::abs(f.output(c)) < 1e-12);
  }
}

TEST_CASE("washout of a ramp approaches the slope at alpha=1") {
  WashoutFilter<double> f(1.0, 0.0);
  const double dt = 1e-3;
  drive(f, [](double t) { return t; }, dt, 10.0);
  // alpha p/(p+alpha) of t is (1 - e^{-alpha t}) for alpha = 1.
  CHECK(std::abs(f.output(10.0) - (1.0 - std::exp(-10.0))) < 1e-10);
  CHECK(std::abs(f.output(10.0) - 1.0) < 1e-3);
}

TEST_CASE("washout sine response has amplitude 1/sqrt(2) and phase lead pi/4") {
  WashoutFilter<double> f(1.0, 0.0);
  const double dt = 1e-3;
  drive(f, [](double t) { return std::sin(t); }, dt, 30.0);
  // p/(p+1) at w=1 has gain 1/sqrt(2), phase +pi/4.
  double max_err = 0.0;
  for (int k = 0; k < 6300; ++k) {
    const double t = 30.0 + k * dt;
    f.step(std::sin(t), std::sin(t + 0.5 * dt), std::sin(t + dt), dt);
    const double expected = (1.0 / std::sqrt(2.0)) * std::sin(t + dt + M_PI / 4.0);
    max_err = std::max(max_err, std::abs(f.output(std::sin(t + dt)) - expected));
  }
  CHECK(max_err < 1e-6);
}

TEST_CASE("filters are linear in their inputs") {
  const double alpha = 1.3, a = 2.0, b = -0.7;
  auto u = [](double t) { return std::sin(2.0 * t); };
  auto w = [](double t) { return std::cos(0.7 * t) - 0.2; };
  LagFilter<double> fu(alpha, 0.0), fw(alpha, 0.0), fc(alpha, 0.0);
  const double dt = 1e-3;
  for (int k = 0; k < 5000; ++k) {
    const double t = k * dt;
    fu.step(u(t), u(t + 0.5 * dt), u(t + dt), dt);
    fw.step(w(t), w(t + 0.5 * dt), w(t + dt), dt);
    auto c = [&](double s) { return a * u(s) + b * w(s); };
    fc.step(c(t), c(t + 0.5 * dt), c(t + dt), dt);
  }
  CHECK(std::abs(fc.output() - (a * fu.output() + b * fw.output())) < 1e-10);
}

TEST_CASE("washout plus alpha^2 times lag reconstructs alpha times the input") {
  // alpha p/(p+alpha) + alpha^2/(p+alpha) = alpha, exactly, for matched
  // (zero) initializations -- checked along the whole transient.
  const double alpha = 2.0;
  auto u = [](double t) { return 1.8 + 0.6 * std::sin(3.0 * t); };
  WashoutFilter<double> g1(alpha, 0.0);  // deliberately not exact-initialized
  LagFilter<double> g2(alpha, 0.0);
  const double dt = 1e-3;
  for (int k = 0; k < 5000; ++k) {
    const double t = k * dt;
    g1.step(u(t), u(t + 0.5 * dt), u(t + dt), dt);
    g2.step(u(t), u(t + 0.5 * dt), u(t + dt), dt);
    const double t1 = t + dt;
    CHECK(std::abs(g1.output(u(t1)) + alpha * alpha * g2.output() - alpha * u(t1)) < 1e-9);
  }
}

TEST_CASE("at alpha=1 the washout plus lag sum settles to the constant input") {
  const double alpha = 1.0;
  const double c = 1.8;
  WashoutFilter<double> g1(alpha, 0.0);
  LagFilter<double> g2(alpha, 0.0);
  const double dt = 1e-3;
  for (int k = 0; k < 12000; ++k) {
    g1.step(c, c, c, dt);
    g2.step(c, c, c, dt);
  }
  CHECK(std::abs(g1.output(c) + alpha * g2.output() - alpha * c) < 1e-5);
}

TEST_CASE("lag filter works elementwise on vectors") {
  LagFilter<Vec3> f(1.0, Vec3::Zero());
  const double dt = 1e-3;
  const Vec3 c(1.0, -2.0, 0.5);
  for (int k = 0; k < 14000; ++k) {
    f.step(c, c, c, dt);
  }
  CHECK((f.output() - c).norm() < 1e-4);
}

TEST_CASE("swapping residual vanishes for a zero signal") {
  auto zero = [](double) { return 0.0; };
  auto y = [](double t) { return std::cos(t); };
  auto ydot = [](double t) { return -std::sin(t); };
  const auto res = swapping_residual(zero, y, ydot, 1.0, 1e-3, 5.0);
  for (double r : res) {
    CHECK(std::abs(r) == 0.0);
  }
}

TEST_CASE("swapping residual is integration error only with zero initialization") {
  auto x = [](double t) { return std::sin(2.0 * t); };
  auto y = [](double t) { return std::cos(t); };
  auto ydot = [](double t) { return -std::sin(t); };
  const auto res = swapping_residual(x, y, ydot, 1.0, 1e-3, 20.0);
  double max_abs = 0.0;
  for (double r : res) {
    max_abs = std::max(max_abs, std::abs(r));
  }
  CHECK(max_abs < 1e-5);
}

TEST_CASE("swapping residual decays like exp(-alpha t) from nonzero filter states") {
  const double alpha = 1.0;
  auto x = [](double t) { return std::sin(2.0 * t); };
  auto y = [](double t) { return std::cos(t); };
  auto ydot = [](double t) { return -std::sin(t); };
  SwappingInit init;
  init.product_filter = 1.0;
  const double dt = 1e-3;
  const auto res = swapping_residual(x, y, ydot, alpha, dt, 12.0, init);

  // Fit log |residual envelope| over [1, 9] s by least squares.
  std::vector<double> ts, ls;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const double t = k * dt;
    if (t < 1.0 || t > 9.0) continue;
    const double mag = std::abs(res[k]);
    if (mag > 1e-14) {
      ts.push_back(t);
      ls.push_back(std::log(mag));
    }
  }
  REQUIRE(ts.size() > 1000);
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += ls[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * ls[i];
  }
  const double n = static_cast<double>(ts.size());
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  CHECK(std::abs(-slope - alpha) < 0.05 * alpha);
}
