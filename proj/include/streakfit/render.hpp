#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "streakfit/camera.hpp"
#include "streakfit/grid.hpp"
#include "streakfit/observer.hpp"
#include "streakfit/orbit.hpp"

namespace streakfit {

/// The Gaussian footprint is cut off at this many sigmas.
inline constexpr double kPsfCutoffSigmas = 4.0;
/// Between this radius and the cutoff the Gaussian is rolled off with a C2
/// smootherstep so the rendered image stays differentiable in the orbit.
inline constexpr double kPsfTaperStartSigmas = 3.5;

/// Sub-image of the full sensor. Crop pixel (0, 0) is sensor pixel (x0, y0).
struct CropBounds {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  Vec2 origin() const { return Vec2(x0, y0); }
  double diagonal() const;
  bool operator==(const CropBounds&) const = default;
};

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

/// Sensor-pixel coordinates of a crop corner. "Top" is row y0.
Vec2 corner_pixel(const CropBounds& crop, Corner c);
Corner opposite(Corner c);

/// Observed or synthesised long-exposure streak image with everything needed
/// to regenerate it from an orbit.
struct StreakImage {
  Grid pixels;
  ExposureWindow window;
  ObserverSite site;
  Pointing pointing;
  CameraIntrinsics intrinsics;
  std::vector<CameraFrame> frames;
  double psf_sigma = 2.0;
  CropBounds crop;
  std::optional<Corner> start_corner;
  /// Noise standard deviation applied during simulation (metadata only).
  double noise_sigma = 0.0;
  /// Projected sample positions in crop coordinates. Filled by render_streak.
  std::vector<Vec2> path;

  /// Rebuilds `frames` from site, pointing, window and intrinsics.
  void rebuild_frames();
};

/// 1/(sigma sqrt(2 pi)) exp(-|d|^2 / (2 sigma^2)), tapered to zero at 4 sigma.
double psf_value(const Vec2& u_proj, const Vec2& u_pixel, double sigma);

/// Adds one PSF footprint centred at `u_crop` (crop coordinates) into `out`.
void splat_psf(Grid& out, const Vec2& u_crop, double sigma);

/// Sums the PSF of the propagated, projected orbit over all frames into a
/// zero-initialised grid of the crop's size. Samples behind the camera or far
/// outside the crop contribute nothing. Throws InvalidArgument for a
/// non-finite state and lets propagation errors escape.
void accumulate_streak(Grid& out, const OrbitState& o, std::span<const CameraFrame> frames,
                       double sigma, const CropBounds& crop, std::vector<Vec2>* path = nullptr);

StreakImage render_streak(const OrbitState& o, std::span<const CameraFrame> frames,
                          const ExposureWindow& window, double sigma, const CropBounds& crop);

/// Divides by the maximum pixel when it is positive.
void normalize_peak(Grid& g);

struct Hole {
  Vec2 center;  ///< crop coordinates
  double diameter = 0.0;
};

/// Zeroes `count` disks with diameters U(min_diameter, max_diameter) centred at
/// arc-length-uniform positions along the streak path.
StreakImage inject_holes(const StreakImage& img, std::mt19937_64& rng, int count = 4,
                         double min_diameter = 5.0, double max_diameter = 20.0,
                         std::vector<Hole>* holes = nullptr);

/// Sets every pixel within a hole's radius to exactly zero.
void cut_holes(Grid& g, std::span<const Hole> holes);

/// Adds N(0, sigma_noise^2) per pixel and clips at zero.
StreakImage add_gaussian_noise(const StreakImage& img, double sigma_noise, std::mt19937_64& rng);

/// Noise standard deviation for a unit-amplitude streak at the given SNR.
inline double noise_sigma_for_snr(double snr) { return 1.0 / snr; }

}  // namespace streakfit
