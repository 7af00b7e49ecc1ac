#pragma once

#include <vector>

#include <Eigen/Core>

#include "streakfit/observer.hpp"
#include "streakfit/orbit.hpp"

namespace streakfit {

using Vec2 = Eigen::Vector2d;

inline constexpr double kArcsecToRad = kPi / (180.0 * 3600.0);

/// Pinhole intrinsics for a distortion-free tangent-plane camera.
///
/// Pixel (x, y) is column x, row y of the full sensor; pixel centres sit on
/// integer coordinates.
struct CameraIntrinsics {
  double pixel_scale = 10.0;  ///< arcsec per pixel
  int width = 4930;
  int height = 7382;
  Vec2 principal_point = Vec2(2464.5, 3690.5);

  double radians_per_pixel() const { return pixel_scale * kArcsecToRad; }
  bool contains(const Vec2& u) const;
};

/// Validates pixel scale and principal point; throws InvalidArgument.
void validate(const CameraIntrinsics& intr);

/// Inertial boresight with a roll reference.
struct Pointing {
  Vec3 boresight = Vec3::UnitX();
  Vec3 up_reference = Vec3::UnitZ();

  /// Boresight from right ascension / declination; `roll_deg` rotates the up
  /// reference from celestial north towards east.
  static Pointing from_radec(double ra_deg, double dec_deg, double roll_deg);
  double ra_deg() const;
  double dec_deg() const;
  double roll_deg() const;
};

/// Camera pose at one instant. The image axes are derived once at construction:
/// `up()` maps to +y pixels and `right()` to +x pixels.
class CameraFrame {
 public:
  CameraFrame(double epoch, const Vec3& observer_eci, const Vec3& boresight,
              const Vec3& up_reference, const CameraIntrinsics& intrinsics);

  double epoch() const { return epoch_; }
  const Vec3& observer_eci() const { return observer_; }
  const Vec3& boresight() const { return forward_; }
  const Vec3& up_reference() const { return up_reference_; }
  const Vec3& right() const { return right_; }
  const Vec3& up() const { return up_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }

 private:
  double epoch_;
  Vec3 observer_;
  Vec3 forward_;
  Vec3 up_reference_;
  Vec3 right_;
  Vec3 up_;
  CameraIntrinsics intrinsics_;
};

/// Gnomonic projection of an inertial point. Throws GeometryError if the
/// point is not in front of the tangent plane.
Vec2 world_to_pixel(const Vec3& p_eci, const CameraFrame& frame);

/// Like world_to_pixel but returns false instead of throwing.
bool try_world_to_pixel(const Vec3& p_eci, const CameraFrame& frame, Vec2& out);

/// Unit inertial line of sight through pixel u.
Vec3 pixel_to_los(const Vec2& u, const CameraFrame& frame);

/// One frame per timestamp of the window; boresight is inertially fixed and the
/// observer follows Earth rotation.
std::vector<CameraFrame> frames_for_window(const ObserverSite& site, const Pointing& pointing,
                                           const ExposureWindow& window,
                                           const CameraIntrinsics& intrinsics = {});

}  // namespace streakfit
