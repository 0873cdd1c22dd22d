#pragma once

#include <utility>

namespace kml {

/// One classical Runge-Kutta step. State must be copyable and provide
/// axpy(double, const State&); rhs(t, y) returns dy/dt as a State.
template <class State, class Rhs>
State rk4_step(const State& y, double t, double dt, Rhs&& rhs) {
  const State k1 = rhs(t, y);
  State y2 = y;
  y2.axpy(0.5 * dt, k1);
  const State k2 = rhs(t + 0.5 * dt, y2);
  State y3 = y;
  y3.axpy(0.5 * dt, k2);
  const State k3 = rhs(t + 0.5 * dt, y3);
  State y4 = y;
  y4.axpy(dt, k3);
  const State k4 = rhs(t + dt, y4);
  State out = y;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  return out;
}

}  // namespace kml
