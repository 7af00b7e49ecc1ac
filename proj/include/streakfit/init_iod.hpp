#pragma once

#include <array>
#include <random>
#include <vector>

#include "streakfit/optimizer.hpp"
#include "streakfit/orbit.hpp"

namespace streakfit {

/// Timestamped line of sight from an observer.
struct LosObservation {
  double epoch = 0.0;
  Vec3 site_eci = Vec3::Zero();
  Vec3 los = Vec3::UnitX();
};

struct GaussOptions {
  int max_refinements = 100;
  /// Relative change in slant ranges at which refinement stops.
  double tolerance = 1e-10;
  /// Candidate roots must exceed this geocentric distance (km).
  double min_radius = kEarthRadius;
  /// Preferred geocentric distance for root selection (km).
  double preferred_radius = 1.5 * kEarthRadius;
};

/// Classical Gauss angles-only solution with iterative f and g refinement.
/// Returns the state at the middle observation epoch. Throws GeometryError
/// for degenerate geometry or when no admissible root exists, and
/// ConvergenceError when refinement diverges.
OrbitState gauss_iod(const std::array<LosObservation, 3>& obs, double mu = kMuEarth,
                     const GaussOptions& options = {});

/// Coefficients of r^8 + a r^6 + b r^3 + c from the Gauss preliminary step.
struct GaussPolynomial {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double operator()(double r) const;
};

/// Positive real roots above `min_radius`, ascending.
std::vector<double> polynomial_roots(const GaussPolynomial& poly, double min_radius);

/// Angle (radians) between the observed LOS and the LOS implied by `state`,
/// maximised over the three observations.
double los_residual(const OrbitState& state, const std::array<LosObservation, 3>& obs,
                    double mu = kMuEarth);

/// Which exposure instant a backprojected pixel belongs to.
enum class ExposureInstant { Start, Middle, End };

struct LosPick {
  std::size_t image = 0;
  ExposureInstant instant = ExposureInstant::Start;
};

/// Three (image, instant) pairs used to form a Gauss triple: exposure starts
/// of the first, middle and last image when there are three or more images,
/// start/middle/end of a single image otherwise.
std::array<LosPick, 3> los_picks(const ObservationSet& obs);

const CameraFrame& frame_at(const StreakImage& img, ExposureInstant instant);

/// End-to-end initialisation from the crop corners nearest the streak start
/// (multi-image) or from both end corners and the image centre (single
/// image). Requires start_corner metadata; result is at obs.t_initial.
OrbitState corner_init(const ObservationSet& obs, double mu = kMuEarth);

enum class InitLevel { I = 1, II, III, IV, V };

/// Endpoint perturbation radius in pixels for each level.
double level_radius(InitLevel level);

/// Perturbs the true projected endpoints by the level radius in a uniformly
/// random direction, backprojects, and solves Gauss; result is at
/// obs.t_initial. Resamples up to `max_attempts` times if Gauss fails.
OrbitState degraded_init(const OrbitState& truth, const ObservationSet& obs, InitLevel level,
                         std::mt19937_64& rng, int max_attempts = 1000, double mu = kMuEarth);

/// Same, with an explicit radius in pixels.
OrbitState perturbed_endpoint_init(const OrbitState& truth, const ObservationSet& obs,
                                   double radius_px, std::mt19937_64& rng, int max_attempts = 1000,
                                   double mu = kMuEarth);

}  // namespace streakfit
