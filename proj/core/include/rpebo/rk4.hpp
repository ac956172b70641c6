#pragma once

namespace rpebo {

/// Classical RK4 step for xdot = f(x, t) with inputs sampled at the stage
/// times t, t + dt/2 and t + dt. S needs S + S and double * S.
template <class S, class F0, class Fm, class F1>
S rk4_step(const S& s, double dt, F0&& f_start, Fm&& f_mid, F1&& f_end) {
  const S k1 = f_start(s);
  const S k2 = f_mid(s + (0.5 * dt) * k1);
  const S k3 = f_mid(s + (0.5 * dt) * k2);
  const S k4 = f_end(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace rpebo
