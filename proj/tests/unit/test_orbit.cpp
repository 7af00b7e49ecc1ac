#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "streakfit/errors.hpp"
#include "streakfit/orbit.hpp"
#include "streakfit/sim_harness.hpp"

using namespace streakfit;

namespace {

KeplerianElements elements(double rp, double e, double i, double raan, double argp, double f) {
  KeplerianElements el;
  el.periapsis_radius = rp;
  el.eccentricity = e;
  el.inclination = i;
  el.raan = raan;
  el.arg_periapsis = argp;
  el.true_anomaly = f;
  return el;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1.0); }

}  // namespace

TEST_CASE("circular equatorial elements give the textbook state") {
  const OrbitState s = elements_to_state(elements(7000.0, 0.0, 0.0, 0.0, 0.0, 0.0));
  CHECK(s.position.x() == doctest::Approx(7000.0).epsilon(1e-15));
  CHECK(std::abs(s.position.y()) < 1e-9);
  CHECK(std::abs(s.position.z()) < 1e-9);
  CHECK(std::abs(s.velocity.x()) < 1e-12);
  CHECK(s.velocity.y() == doctest::Approx(std::sqrt(kMuEarth / 7000.0)).epsilon(1e-15));
  CHECK(std::abs(s.velocity.z()) < 1e-12);
}

TEST_CASE("zero true anomaly places the object at periapsis") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    const double rp = 6800.0 + 3000.0 * u(rng);
    const OrbitState s = elements_to_state(elements(rp, 0.9 * u(rng), 180.0 * u(rng), 360.0 * u(rng), 360.0 * u(rng), 0.0));
    CHECK(s.position.norm() == doctest::Approx(rp).epsilon(1e-13));
  }
}

TEST_CASE("conic radius matches r_p (1 + e) / (1 + e cos f)") {
  const KeplerianElements el = elements(8000.0, 0.35, 40.0, 10.0, 70.0, 123.0);
  const OrbitState s = elements_to_state(el);
  const double f = 123.0 * kDegToRad;
  CHECK(s.position.norm() == doctest::Approx(8000.0 * 1.35 / (1.0 + 0.35 * std::cos(f))).epsilon(1e-13));
}

TEST_CASE("unbound elements are rejected") {
  CHECK_THROWS_AS(elements_to_state(elements(7000.0, 1.0, 0, 0, 0, 0)), UnsupportedOrbit);
  CHECK_THROWS_AS(elements_to_state(elements(7000.0, 1.4, 0, 0, 0, 0)), UnsupportedOrbit);
  CHECK_THROWS_AS(elements_to_state(elements(-1.0, 0.1, 0, 0, 0, 0)), InvalidArgument);
}

TEST_CASE("type C samples round-trip through state to 1e-9 relative") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 200; ++n) {
    const KeplerianElements el = sample_orbit(OrbitType::C, rng);
    const KeplerianElements back = state_to_elements(elements_to_state(el));
    CHECK(rel(back.periapsis_radius, el.periapsis_radius) < 1e-9);
    CHECK(rel(back.eccentricity, el.eccentricity) < 1e-9);
    CHECK(angle_difference(back.inclination, el.inclination) < 1e-7);
    CHECK(angle_difference(back.raan, el.raan) < 1e-7);
    CHECK(angle_difference(back.arg_periapsis, el.arg_periapsis) < 1e-7);
    CHECK(angle_difference(back.true_anomaly, el.true_anomaly) < 1e-7);
  }
}

TEST_CASE("elements round-trip across eccentricities 1e-6 to 0.99") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 300; ++n) {
    const double e = std::pow(10.0, -6.0 + 6.0 * u(rng)) * 0.99;
    const KeplerianElements el =
        elements(7000.0 + 30000.0 * u(rng), std::max(e, 1e-6), 1.0 + 178.0 * u(rng), 360.0 * u(rng),
                 360.0 * u(rng), 360.0 * u(rng));
    const OrbitState s = elements_to_state(el);
    const OrbitState s2 = elements_to_state(state_to_elements(s));
    CHECK((s2.position - s.position).norm() / s.position.norm() < 1e-9);
    CHECK((s2.velocity - s.velocity).norm() / s.velocity.norm() < 1e-9);
  }
}

TEST_CASE("exactly circular orbit flags periapsis angles undefined") {
  const KeplerianElements el = state_to_elements(elements_to_state(elements(7000.0, 0.0, 30.0, 20.0, 0.0, 45.0)));
  CHECK(el.eccentricity < 1e-12);
  CHECK_FALSE(el.arg_periapsis_defined);
  CHECK_FALSE(el.true_anomaly_defined);
}

TEST_CASE("circular speed state recovers r_p") {
  OrbitState s;
  s.position = Vec3(7000.0, 0.0, 0.0);
  s.velocity = Vec3(0.0, std::sqrt(kMuEarth / 7000.0), 0.0);
  const KeplerianElements el = state_to_elements(s);
  CHECK(el.eccentricity < 1e-9);
  CHECK(std::abs(el.periapsis_radius - 7000.0) < 1e-6);
}

TEST_CASE("propagation identities") {
  const OrbitState s = elements_to_state(elements(8500.0, 0.15, 55.0, 100.0, 30.0, 200.0), 12.0);
  SUBCASE("dt = 0 returns the same state") {
    const OrbitState t = propagate_kepler(s, 0.0);
    CHECK(t.position == s.position);
    CHECK(t.velocity == s.velocity);
  }
  SUBCASE("one period returns to the start") {
    const double a = 8500.0 / (1.0 - 0.15);
    const double period = 2.0 * kPi * std::sqrt(a * a * a / kMuEarth);
    CHECK(orbital_period(s) == doctest::Approx(period).epsilon(1e-12));
    CHECK((propagate_kepler(s, period).position - s.position).norm() < 1e-6);
  }
  SUBCASE("forward then backward recovers the state") {
    for (double dt : {1.0, 60.0, 240.0, 3000.0, -500.0}) {
      const OrbitState back = propagate_kepler(propagate_kepler(s, dt), -dt);
      CHECK((back.position - s.position).norm() / s.position.norm() < 1e-8);
      CHECK((back.velocity - s.velocity).norm() / s.velocity.norm() < 1e-8);
    }
  }
  SUBCASE("energy is conserved") {
    for (double dt : {10.0, 240.0, 5000.0}) {
      CHECK(rel(propagate_kepler(s, dt).energy(), s.energy()) < 1e-10);
    }
  }
  SUBCASE("unbound states are refused") {
    OrbitState h = s;
    h.velocity *= 2.0;
    CHECK_THROWS_AS(propagate_kepler(h, 10.0), UnsupportedOrbit);
  }
}

TEST_CASE("type B orbit over 60 s agrees with the ODE integrator") {
  std::mt19937_64 rng(17);
  const OrbitState s = elements_to_state(sample_orbit(OrbitType::B, rng));
  CHECK((propagate_kepler(s, 60.0).position - oracle::integrate_two_body(s, 60.0)).norm() < 1e-6);
}

TEST_CASE("Table 1 orbits agree with the ODE integrator over 240 s") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const OrbitType type = all_orbit_types()[static_cast<std::size_t>(n % 4)];
    const OrbitState s = elements_to_state(sample_orbit(type, rng));
    worst = std::max(worst, (propagate_kepler(s, 240.0).position - oracle::integrate_two_body(s, 240.0)).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("Lagrange coefficients satisfy f gdot - fdot g = 1") {
  const OrbitState s = elements_to_state(elements(9000.0, 0.5, 10.0, 0.0, 0.0, 90.0));
  for (double dt : {5.0, 100.0, 2000.0}) {
    const LagrangeCoefficients c = kepler_coefficients(s.position, s.velocity, dt);
    CHECK(c.f * c.gdot - c.fdot * c.g == doctest::Approx(1.0).epsilon(1e-10));
  }
}
