#include "streakfit/camera.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "streakfit/errors.hpp"

namespace streakfit {

bool CameraIntrinsics::contains(const Vec2& u) const {
  return u.x() >= -0.5 && u.y() >= -0.5 && u.x() <= width - 0.5 && u.y() <= height - 0.5;
}

void validate(const CameraIntrinsics& intr) {
  if (!(intr.pixel_scale > 0.0)) throw InvalidArgument("pixel scale must be positive");
  if (intr.width <= 0 || intr.height <= 0) throw InvalidArgument("sensor size must be positive");
  if (!intr.contains(intr.principal_point)) {
    throw InvalidArgument("principal point lies outside the sensor");
  }
}

namespace {

// Celestial north projected onto the plane normal to `boresight`, with a
// fallback near the poles.
void sky_axes(const Vec3& boresight, Vec3& north, Vec3& east) {
  Vec3 pole = Vec3::UnitZ();
  if (std::abs(boresight.dot(pole)) > 1.0 - 1e-12) pole = Vec3::UnitX();
  north = (pole - pole.dot(boresight) * boresight).normalized();
  east = pole.cross(boresight).normalized();
}

}  // namespace

Pointing Pointing::from_radec(double ra_deg, double dec_deg, double roll_deg) {
  const double ra = ra_deg * kDegToRad;
  const double dec = dec_deg * kDegToRad;
  const double roll = roll_deg * kDegToRad;
  Pointing p;
  p.boresight = Vec3(std::cos(dec) * std::cos(ra), std::cos(dec) * std::sin(ra), std::sin(dec));
  Vec3 north, east;
  sky_axes(p.boresight, north, east);
  p.up_reference = (std::cos(roll) * north + std::sin(roll) * east).normalized();
  return p;
}

double Pointing::ra_deg() const {
  return wrap_degrees(std::atan2(boresight.y(), boresight.x()) * kRadToDeg);
}

double Pointing::dec_deg() const {
  return std::asin(std::clamp(boresight.normalized().z(), -1.0, 1.0)) * kRadToDeg;
}

double Pointing::roll_deg() const {
  const Vec3 a = boresight.normalized();
  Vec3 north, east;
  sky_axes(a, north, east);
  const Vec3 up = up_reference - up_reference.dot(a) * a;
  return wrap_degrees(std::atan2(up.dot(east), up.dot(north)) * kRadToDeg);
}

CameraFrame::CameraFrame(double epoch, const Vec3& observer_eci, const Vec3& boresight,
                         const Vec3& up_reference, const CameraIntrinsics& intrinsics)
    : epoch_(epoch),
      observer_(observer_eci),
      up_reference_(up_reference),
      intrinsics_(intrinsics) {
  const double n = boresight.norm();
  if (!(n > 0.0)) throw InvalidArgument("boresight must be non-zero");
  forward_ = boresight / n;
  const Vec3 up = up_reference - up_reference.dot(forward_) * forward_;
  if (!(up.norm() > 1e-9 * up_reference.norm())) {
    throw InvalidArgument("up reference is parallel to the boresight");
  }
  up_ = up.normalized();
  right_ = up_.cross(forward_);
}

bool try_world_to_pixel(const Vec3& p_eci, const CameraFrame& frame, Vec2& out) {
  const Vec3 d = p_eci - frame.observer_eci();
  const double depth = d.dot(frame.boresight());
  if (!(depth > 0.0)) return false;
  const double inv = 1.0 / (depth * frame.intrinsics().radians_per_pixel());
  out = frame.intrinsics().principal_point + Vec2(d.dot(frame.right()) * inv, d.dot(frame.up()) * inv);
  return true;
}

Vec2 world_to_pixel(const Vec3& p_eci, const CameraFrame& frame) {
  Vec2 u;
  if (!try_world_to_pixel(p_eci, frame, u)) throw GeometryError("target is behind the camera");
  return u;
}

Vec3 pixel_to_los(const Vec2& u, const CameraFrame& frame) {
  const double s = frame.intrinsics().radians_per_pixel();
  const Vec2 t = (u - frame.intrinsics().principal_point) * s;
  return (frame.boresight() + t.x() * frame.right() + t.y() * frame.up()).normalized();
}

std::vector<CameraFrame> frames_for_window(const ObserverSite& site, const Pointing& pointing,
                                           const ExposureWindow& window,
                                           const CameraIntrinsics& intrinsics) {
  const std::vector<double> times = interpolate_timestamps(window);
  std::vector<CameraFrame> frames;
  frames.reserve(times.size());
  for (double t : times) {
    frames.emplace_back(t, site_eci(site, t), pointing.boresight, pointing.up_reference, intrinsics);
  }
  return frames;
}

}  // namespace streakfit
