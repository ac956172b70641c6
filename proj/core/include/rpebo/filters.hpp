#pragma once

#include <functional>
#include <vector>

#include "rpebo/rk4.hpp"

namespace rpebo {

/// First-order lag 1/(p + alpha), realized as xdot = -alpha x + u, y = x.
/// Construct with x0 = 0 (of the signal's shape) for exact initialization:
/// the filter then carries no decaying initial-condition transient.
template <class V>
class LagFilter {
 public:
  LagFilter(double alpha, const V& x0) : alpha_(alpha), x_(x0) {}

  static V deriv(double alpha, const V& x, const V& u) { return -alpha * x + u; }

  void step(const V& u0, const V& um, const V& u1, double dt) {
    x_ = rk4_step(
        x_, dt, [&](const V& x) { return deriv(alpha_, x, u0); },
        [&](const V& x) { return deriv(alpha_, x, um); },
        [&](const V& x) { return deriv(alpha_, x, u1); });
  }

  const V& output() const { return x_; }
  const V& state() const { return x_; }
  void set_state(const V& x) { x_ = x; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  V x_;
};

/// Washout alpha p/(p + alpha), realized as
///   xdot = -alpha x + alpha^2 u,  y = -x + alpha u.
/// Exact initialization is x0 = alpha * u(0), which makes the output equal to
/// the zero-state lag-filtered derivative alpha/(p+alpha)[udot].
template <class V>
class WashoutFilter {
 public:
  WashoutFilter(double alpha, const V& u0) : alpha_(alpha), x_(alpha * u0) {}

  static V deriv(double alpha, const V& x, const V& u) {
    return -alpha * x + (alpha * alpha) * u;
  }

  void step(const V& u0, const V& um, const V& u1, double dt) {
    x_ = rk4_step(
        x_, dt, [&](const V& x) { return deriv(alpha_, x, u0); },
        [&](const V& x) { return deriv(alpha_, x, um); },
        [&](const V& x) { return deriv(alpha_, x, u1); });
  }

  V output(const V& u) const { return -x_ + alpha_ * u; }
  const V& state() const { return x_; }
  void set_state(const V& x) { x_ = x; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  V x_;
};

/// Initial filter states for the swapping-identity residual below. All zero
/// reproduces the identity up to integration error; nonzero states inject a
/// transient that decays like exp(-alpha t).
struct SwappingInit {
  double product_filter = 0.0;  // state of alpha/(p+alpha)[x y]
  double x_filter = 0.0;        // state of alpha/(p+alpha)[x]
  double correction_filter = 0.0;
};

/// Per-sample residual of the filter-swapping identity
///   alpha/(p+alpha)[x y] = y alpha/(p+alpha)[x] - 1/(p+alpha)[ydot alpha/(p+alpha)[x]]
/// for scalar signals sampled from the callables on a uniform grid.
std::vector<double> swapping_residual(const std::function<double(double)>& x,
                                      const std::function<double(double)>& y,
                                      const std::function<double(double)>& ydot,
                                      double alpha, double dt, double t_end,
                                      const SwappingInit& init = {});

}  // namespace rpebo
