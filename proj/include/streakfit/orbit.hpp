#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace streakfit {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// WGS-84 gravitational parameter, km^3/s^2.
inline constexpr double kMuEarth = 398600.4418;
/// Equatorial radius, km.
inline constexpr double kEarthRadius = 6378.137;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Cartesian two-body state in the Earth-centred inertial frame.
///
/// `epoch` is in seconds past J2000, position in km, velocity in km/s.
struct OrbitState {
  double epoch = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();

  /// Packs (px, py, pz, vx, vy, vz).
  Vec6 as_vector() const;
  static OrbitState from_vector(double epoch, const Vec6& pv);

  /// Specific orbital energy v^2/2 - mu/|p|.
  double energy(double mu = kMuEarth) const;
  Vec3 angular_momentum() const { return position.cross(velocity); }
};

/// Classical elements parameterised by periapsis radius. Angles in degrees.
///
/// For near-circular or near-equatorial orbits some angles are not defined;
/// state_to_elements clears the matching flag and folds the angle into the
/// ones that remain meaningful (argument of latitude, longitude of
/// periapsis, or true longitude).
struct KeplerianElements {
  double periapsis_radius = 0.0;
  double eccentricity = 0.0;
  double inclination = 0.0;
  double raan = 0.0;
  double arg_periapsis = 0.0;
  double true_anomaly = 0.0;

  bool raan_defined = true;
  bool arg_periapsis_defined = true;
  bool true_anomaly_defined = true;

  double semi_major_axis() const { return periapsis_radius / (1.0 - eccentricity); }
};

/// Thresholds below which angles are reported as undefined.
inline constexpr double kCircularEccentricity = 1e-8;
inline constexpr double kEquatorialInclinationDeg = 1e-8;

/// Throws UnsupportedOrbit for e >= 1, InvalidArgument for mu <= 0 or r_p <= 0.
OrbitState elements_to_state(const KeplerianElements& el, double epoch = 0.0,
                             double mu = kMuEarth);

/// Throws GeometryError for a rectilinear (zero angular momentum) state.
KeplerianElements state_to_elements(const OrbitState& s, double mu = kMuEarth);

/// Lagrange coefficients mapping (p0, v0) to the state dt seconds later.
struct LagrangeCoefficients {
  double f = 1.0;
  double g = 0.0;
  double fdot = 0.0;
  double gdot = 1.0;
};

/// Kepler's equation is solved for the change in eccentric anomaly with
/// Newton iteration (tolerance 1e-12 rad, at most 50 iterations).
/// Throws UnsupportedOrbit if the state is not bound and ConvergenceError if
/// Newton iteration fails.
LagrangeCoefficients kepler_coefficients(const Vec3& p0, const Vec3& v0, double dt,
                                         double mu = kMuEarth);

OrbitState propagate_kepler(const OrbitState& s, double dt, double mu = kMuEarth);

/// Position only; same solver as propagate_kepler.
Vec3 propagate_position(const OrbitState& s, double dt, double mu = kMuEarth);

double orbital_period(const OrbitState& s, double mu = kMuEarth);

/// Wraps an angle in degrees to [0, 360).
double wrap_degrees(double deg);

}  // namespace streakfit
