#include "streakfit/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "streakfit/errors.hpp"

namespace streakfit {

namespace {

constexpr double kKeplerTolerance = 1e-12;
constexpr int kKeplerMaxIterations = 50;

double atan2_deg(double y, double x) { return wrap_degrees(std::atan2(y, x) * kRadToDeg); }

}  // namespace

Vec6 OrbitState::as_vector() const {
  Vec6 out;
  out << position, velocity;
  return out;
}

OrbitState OrbitState::from_vector(double epoch, const Vec6& pv) {
  return OrbitState{epoch, pv.head<3>(), pv.tail<3>()};
}

double OrbitState::energy(double mu) const {
  return 0.5 * velocity.squaredNorm() - mu / position.norm();
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

OrbitState elements_to_state(const KeplerianElements& el, double epoch, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("gravitational parameter must be positive");
  if (!(el.periapsis_radius > 0.0)) throw InvalidArgument("periapsis radius must be positive");
  if (el.eccentricity < 0.0) throw InvalidArgument("eccentricity must be non-negative");
  if (el.eccentricity >= 1.0) {
    throw UnsupportedOrbit("only elliptical orbits are supported (e = " +
                           std::to_string(el.eccentricity) + ")");
  }

  const double e = el.eccentricity;
  const double p = el.periapsis_radius * (1.0 + e);
  const double f = el.true_anomaly * kDegToRad;
  const double r = p / (1.0 + e * std::cos(f));
  const double vs = std::sqrt(mu / p);

  const Vec3 r_pqw(r * std::cos(f), r * std::sin(f), 0.0);
  const Vec3 v_pqw(-vs * std::sin(f), vs * (e + std::cos(f)), 0.0);

  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(el.raan * kDegToRad, Vec3::UnitZ()) *
       Eigen::AngleAxisd(el.inclination * kDegToRad, Vec3::UnitX()) *
       Eigen::AngleAxisd(el.arg_periapsis * kDegToRad, Vec3::UnitZ()))
          .toRotationMatrix();

  return OrbitState{epoch, rot * r_pqw, rot * v_pqw};
}

KeplerianElements state_to_elements(const OrbitState& s, double mu) {
  const Vec3& r = s.position;
  const Vec3& v = s.velocity;
  const double rn = r.norm();
  const Vec3 h = r.cross(v);
  const double hn = h.norm();
  if (!(hn > 1e-10 * rn * v.norm()) || hn == 0.0) {
    throw GeometryError("rectilinear orbit: angular momentum vanishes");
  }

  const Vec3 e_vec = ((v.squaredNorm() - mu / rn) * r - r.dot(v) * v) / mu;
  const double e = e_vec.norm();
  const double p = h.squaredNorm() / mu;

  KeplerianElements el;
  el.eccentricity = e;
  el.periapsis_radius = p / (1.0 + e);
  const Vec3 h_hat = h / hn;
  el.inclination = std::acos(std::clamp(h_hat.z(), -1.0, 1.0)) * kRadToDeg;

  const Vec3 node = Vec3::UnitZ().cross(h);
  const double node_n = node.norm();
  const bool circular = e < kCircularEccentricity;
  const bool equatorial = el.inclination < kEquatorialInclinationDeg ||
                          el.inclination > 180.0 - kEquatorialInclinationDeg;

  const Vec3 r_hat = r / rn;
  // Reference direction in the orbital plane from which angles are measured.
  const Vec3 n_hat = equatorial ? Vec3::UnitX() : Vec3(node / node_n);

  if (!equatorial) {
    el.raan = atan2_deg(node.y(), node.x());
  } else {
    el.raan = 0.0;
    el.raan_defined = false;
  }

  if (!circular) {
    const Vec3 e_hat = e_vec / e;
    el.arg_periapsis = atan2_deg(h_hat.dot(n_hat.cross(e_hat)), n_hat.dot(e_hat));
    el.true_anomaly = atan2_deg(h_hat.dot(e_hat.cross(r_hat)), e_hat.dot(r_hat));
  } else {
    // Argument of latitude (or true longitude) carried in true_anomaly.
    el.arg_periapsis = 0.0;
    el.arg_periapsis_defined = false;
    el.true_anomaly = atan2_deg(h_hat.dot(n_hat.cross(r_hat)), n_hat.dot(r_hat));
    el.true_anomaly_defined = false;
  }
  return el;
}

LagrangeCoefficients kepler_coefficients(const Vec3& p0, const Vec3& v0, double dt, double mu) {
  if (dt == 0.0) return {};
  const double r0 = p0.norm();
  const double inv_a = 2.0 / r0 - v0.squaredNorm() / mu;
  if (!(inv_a > 0.0)) throw UnsupportedOrbit("state is not bound; Kepler propagation undefined");
  const double a = 1.0 / inv_a;
  const double sqrt_a = std::sqrt(a);
  const double n = std::sqrt(mu * inv_a * inv_a * inv_a);
  const double ec = 1.0 - r0 * inv_a;                // e cos E0
  const double es = p0.dot(v0) / std::sqrt(mu) / sqrt_a;  // e sin E0

  // Reduce the mean-anomaly change to one revolution; F(x + 2pi) = F(x) + 2pi.
  const double mean = n * dt;
  const double turns = std::round(mean / (2.0 * kPi));
  const double m = mean - turns * 2.0 * kPi;

  double x = m;
  bool converged = false;
  for (int it = 0; it < kKeplerMaxIterations; ++it) {
    const double sx = std::sin(x);
    const double cx = std::cos(x);
    const double fx = x - ec * sx + es * (1.0 - cx) - m;
    const double dfx = 1.0 - ec * cx + es * sx;
    const double step = fx / dfx;
    x -= step;
    if (std::abs(step) < kKeplerTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged || !std::isfinite(x)) {
    throw ConvergenceError("Kepler equation did not converge");
  }
  x += turns * 2.0 * kPi;

  const double sx = std::sin(x);
  const double half = std::sin(0.5 * x);
  const double one_minus_cos = 2.0 * half * half;
  const double r = a + (r0 - a) * std::cos(x) + es * a * sx;

  LagrangeCoefficients c;
  c.f = 1.0 - a / r0 * one_minus_cos;
  c.g = dt - (x - sx) / n;
  c.fdot = -std::sqrt(mu * a) / (r * r0) * sx;
  c.gdot = 1.0 - a / r * one_minus_cos;
  return c;
}

OrbitState propagate_kepler(const OrbitState& s, double dt, double mu) {
  const LagrangeCoefficients c = kepler_coefficients(s.position, s.velocity, dt, mu);
  OrbitState out;
  out.epoch = s.epoch + dt;
  out.position = c.f * s.position + c.g * s.velocity;
  out.velocity = c.fdot * s.position + c.gdot * s.velocity;
  return out;
}

Vec3 propagate_position(const OrbitState& s, double dt, double mu) {
  const LagrangeCoefficients c = kepler_coefficients(s.position, s.velocity, dt, mu);
  return c.f * s.position + c.g * s.velocity;
}

double orbital_period(const OrbitState& s, double mu) {
  const double inv_a = 2.0 / s.position.norm() - s.velocity.squaredNorm() / mu;
  if (!(inv_a > 0.0)) throw UnsupportedOrbit("unbound orbit has no period");
  const double a = 1.0 / inv_a;
  return 2.0 * kPi * std::sqrt(a * a * a / mu);
}

}  // namespace streakfit
