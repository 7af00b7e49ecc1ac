#pragma once

#include <random>
#include <vector>

#include "streakfit/orbit.hpp"

namespace streakfit {

/// Julian Date of the J2000 reference epoch. Internal epochs are seconds past it.
inline constexpr double kJ2000JulianDate = 2451545.0;
inline constexpr double kSecondsPerDay = 86400.0;

/// Ratio of sidereal to solar rotation rate implied by the linear term of the
/// IAU 1982 GMST polynomial.
inline constexpr double kSiderealRateRatio = 1.0 + 8640184.812866 / (876600.0 * 3600.0);
inline constexpr double kSiderealDaySeconds = kSecondsPerDay / kSiderealRateRatio;

inline double julian_date_to_epoch(double jd) { return (jd - kJ2000JulianDate) * kSecondsPerDay; }
inline double epoch_to_julian_date(double t) { return kJ2000JulianDate + t / kSecondsPerDay; }

/// Observer location in Earth-fixed coordinates (km).
struct ObserverSite {
  Vec3 ecef_position = Vec3::Zero();
};

/// Exposure of `duration` seconds starting at `start`, split into `steps`
/// sub-intervals (steps + 1 sample instants).
struct ExposureWindow {
  double start = 0.0;
  double duration = 0.0;
  int steps = 1;

  double end() const { return start + duration; }
};

/// t_n = start + n * duration / steps for n = 0..steps. Throws InvalidArgument
/// when steps < 1 or duration <= 0.
std::vector<double> interpolate_timestamps(const ExposureWindow& w);

/// Greenwich mean sidereal angle (radians, [0, 2pi)) from the IAU 1982 polynomial,
/// treating the epoch as UT1 seconds past J2000.
double gmst_angle(double epoch);

/// Rotation taking Earth-fixed vectors to the inertial frame at `epoch`.
Eigen::Matrix3d ecef_to_eci_rotation(double epoch);

Vec3 site_eci(const ObserverSite& site, double epoch);

/// Uniformly distributed on the sphere of radius kEarthRadius.
ObserverSite random_site(std::mt19937_64& rng);

/// Elevation (radians) of `target_eci` above the local horizon of a spherical Earth.
double elevation_angle(const ObserverSite& site, double epoch, const Vec3& target_eci);

}  // namespace streakfit
