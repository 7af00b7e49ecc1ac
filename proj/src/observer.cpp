#include "streakfit/observer.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "streakfit/errors.hpp"

namespace streakfit {

std::vector<double> interpolate_timestamps(const ExposureWindow& w) {
  if (w.steps < 1) throw InvalidArgument("exposure window needs at least one step");
  if (!(w.duration > 0.0)) throw InvalidArgument("exposure duration must be positive");
  std::vector<double> out(static_cast<std::size_t>(w.steps) + 1);
  for (int n = 0; n < w.steps; ++n) {
    out[static_cast<std::size_t>(n)] = w.start + w.duration * n / w.steps;
  }
  out.back() = w.end();
  return out;
}

double gmst_angle(double epoch) {
  // Split days so the large linear term keeps its precision.
  const double days = epoch / kSecondsPerDay;
  const double whole = std::floor(days);
  const double frac = days - whole;
  const double centuries = days / 36525.0;

  // GMST in seconds of time: 67310.54841 + (876600h + 8640184.812866) T + ...
  // The 876600h * T term is an integer number of days plus the day fraction.
  double seconds = 67310.54841 + frac * kSecondsPerDay +
                   8640184.812866 * centuries + 0.093104 * centuries * centuries -
                   6.2e-6 * centuries * centuries * centuries;
  seconds = std::fmod(seconds, kSecondsPerDay);
  if (seconds < 0.0) seconds += kSecondsPerDay;
  return seconds / kSecondsPerDay * 2.0 * kPi;
}

Eigen::Matrix3d ecef_to_eci_rotation(double epoch) {
  return Eigen::AngleAxisd(gmst_angle(epoch), Vec3::UnitZ()).toRotationMatrix();
}

Vec3 site_eci(const ObserverSite& site, double epoch) {
  return ecef_to_eci_rotation(epoch) * site.ecef_position;
}

ObserverSite random_site(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> z_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> lon_dist(0.0, 2.0 * kPi);
  const double z = z_dist(rng);
  const double lon = lon_dist(rng);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  Vec3 unit(rho * std::cos(lon), rho * std::sin(lon), z);
  return ObserverSite{kEarthRadius * unit.normalized()};
}

double elevation_angle(const ObserverSite& site, double epoch, const Vec3& target_eci) {
  const Vec3 obs = site_eci(site, epoch);
  const Vec3 los = (target_eci - obs).normalized();
  return std::asin(std::clamp(los.dot(obs.normalized()), -1.0, 1.0));
}

}  // namespace streakfit
