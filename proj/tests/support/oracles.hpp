#pragma once

// Reference implementations that share no code with the library. Used as
// test oracles only.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "streakfit/camera.hpp"
#include "streakfit/orbit.hpp"

namespace oracle {

using State = std::array<double, 6>;

/// Adaptive Dormand-Prince integration of p'' = -mu p / |p|^3.
inline streakfit::Vec3 integrate_two_body(const streakfit::OrbitState& s, double dt,
                                          double mu = streakfit::kMuEarth) {
  namespace ode = boost::numeric::odeint;
  State x = {s.position.x(), s.position.y(), s.position.z(), s.velocity.x(), s.velocity.y(), s.velocity.z()};
  auto rhs = [mu](const State& y, State& dy, double) {
    const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    const double k = -mu / (r * r * r);
    dy = {y[3], y[4], y[5], k * y[0], k * y[1], k * y[2]};
  };
  if (dt != 0.0) {
    auto stepper = ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, rhs, x, 0.0, dt, dt / 100.0);
  }
  return {x[0], x[1], x[2]};
}

/// Gnomonic projection written out from the frame axes.
inline streakfit::Vec2 project(const streakfit::Vec3& p_eci, const streakfit::CameraFrame& f) {
  const streakfit::Vec3 d = p_eci - f.observer_eci();
  const double z = d.dot(f.boresight());
  const double k = 1.0 / f.intrinsics().radians_per_pixel();
  return {f.intrinsics().principal_point.x() + k * d.dot(f.right()) / z,
          f.intrinsics().principal_point.y() + k * d.dot(f.up()) / z};
}

/// numpy "linear" percentile from a sorted copy.
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - lo) * (v[i + 1] - v[i]);
}

}  // namespace oracle
