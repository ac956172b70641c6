#include "rpebo/filters.hpp"

#include <cmath>

namespace rpebo {

namespace {

// The correction filter's input contains the x-filter's output, so all three
// filters advance as one coupled system.
struct SwapState {
  double lhs, fx, corr;
  SwapState operator+(const SwapState& o) const {
    return {lhs + o.lhs, fx + o.fx, corr + o.corr};
  }
  friend SwapState operator*(double c, const SwapState& s) {
    return {c * s.lhs, c * s.fx, c * s.corr};
  }
};

}  // namespace

std::vector<double> swapping_residual(const std::function<double(double)>& x,
                                      const std::function<double(double)>& y,
                                      const std::function<double(double)>& ydot,
                                      double alpha, double dt, double t_end,
                                      const SwappingInit& init) {
  // alpha/(p+alpha) is alpha * LagFilter; states are kept unscaled.
  LagFilter<double> lhs(alpha, init.product_filter);      // on x*y
  LagFilter<double> fx(alpha, init.x_filter);             // on x
  LagFilter<double> corr(alpha, init.correction_filter);  // on ydot * alpha/(p+alpha)[x]

  const int n = static_cast<int>(std::llround(t_end / dt));
  std::vector<double> residual;
  residual.reserve(n + 1);

  auto eval_residual = [&](double t) {
    const double lhs_out = alpha * lhs.output();
    const double rhs = y(t) * alpha * fx.output() - corr.output();
    return lhs_out - rhs;
  };

  residual.push_back(eval_residual(0.0));
  for (int k = 0; k < n; ++k) {
    const double t0 = k * dt;
    const double tm = t0 + 0.5 * dt;
    const double t1 = t0 + dt;

    auto deriv = [&](const SwapState& s, double t) {
      return SwapState{-alpha * s.lhs + x(t) * y(t),
                       -alpha * s.fx + x(t),
                       -alpha * s.corr + ydot(t) * alpha * s.fx};
    };
    SwapState s{lhs.state(), fx.state(), corr.state()};
    const SwapState k1 = deriv(s, t0);
    const SwapState k2 = deriv(s + (0.5 * dt) * k1, tm);
    const SwapState k3 = deriv(s + (0.5 * dt) * k2, tm);
    const SwapState k4 = deriv(s + dt * k3, t1);
    s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    lhs.set_state(s.lhs);
    fx.set_state(s.fx);
    corr.set_state(s.corr);

    residual.push_back(eval_residual(t1));
  }
  return residual;
}

}  // namespace rpebo
