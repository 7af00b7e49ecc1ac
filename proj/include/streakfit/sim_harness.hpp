#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streakfit/init_iod.hpp"
#include "streakfit/optimizer.hpp"
#include "streakfit/orbit.hpp"
#include "streakfit/render.hpp"

namespace streakfit {

enum class OrbitType { A, B, C, D };

char to_char(OrbitType t);
OrbitType orbit_type_from_char(char c);
const std::vector<OrbitType>& all_orbit_types();

/// Periapsis radius, eccentricity and uniform angles for one orbit class.
KeplerianElements sample_orbit(OrbitType type, std::mt19937_64& rng);

/// Exposure start spacing: image 3 starts gap13 after image 1, image 2 at a
/// normally distributed gap clipped to [1, gap13 - 1].
struct IntervalSpec {
  double gap13 = 60.0;
  double gap12_mean = 30.0;
  double gap12_sd = 10.0;

  /// gap12 ~ N(gap13 / 2, sd) with sd 10, 15 and 20 s at 60, 120 and 240 s.
  static IntervalSpec for_gap13(double gap13);
};

struct ScenarioOptions {
  int images = 3;
  double exposure = 5.0;
  double psf_sigma = 2.0;
  int holes = 4;
  double hole_min_diameter = 5.0;
  double hole_max_diameter = 20.0;
  /// Crop margin around the streak bounding box, pixels per side.
  double margin_min = 15.0;
  double margin_max = 40.0;
  double max_crop_diagonal = 600.0;
  double min_object_elevation_deg = 15.0;
  double min_pointing_elevation_deg = 20.0;
  double max_pointing_elevation_deg = 80.0;
  int max_site_attempts = 20000;
  int max_pointing_attempts = 20000;
  CameraIntrinsics intrinsics;
};

struct Scenario {
  OrbitType type = OrbitType::A;
  KeplerianElements truth_elements;
  /// Truth at observations.t_initial.
  OrbitState truth_state;
  ObservationSet observations;
  double noise_sigma = 0.0;
  IntervalSpec interval;
  std::uint64_t seed = 0;
  std::vector<std::vector<Hole>> holes;
};

/// Random epoch and geometry for the given elements (which hold at
/// t_initial). Throws GeometryError when no observable geometry was found.
Scenario make_scenario(const KeplerianElements& el, OrbitType type, const IntervalSpec& interval,
                       double noise_sigma, std::mt19937_64& rng, const ScenarioOptions& options = {});

/// Orbit and scenario for one experiment trial, drawn from independent
/// streams of `trial_seed` so that SNR changes only the noise.
Scenario simulate_trial(OrbitType type, double gap13, double snr, std::uint64_t trial_seed,
                        const ScenarioOptions& options = {});

/// Mean pixel distance between the projected start/end points of `fit` and
/// `truth` over all images.
double endpoint_error(const OrbitState& fit, const OrbitState& truth, const ObservationSet& obs);

struct MetricsRow {
  double du = 0.0;
  double drp = 0.0;
  double de = 0.0;
  double di = 0.0;
  double draan = 0.0;
  std::optional<double> dargp;
  std::optional<double> dtrue;
};

/// Absolute angular difference folded into [0, 180].
double angle_difference(double a_deg, double b_deg);

/// Element deltas of `fit` against `truth`; Δu is left at zero. Δω and Δf
/// are omitted for near-circular truth (e < 0.01).
MetricsRow orbital_errors(const OrbitState& fit, const KeplerianElements& truth);

inline constexpr double kCircularTruthEccentricity = 0.01;

const std::vector<std::string>& metric_names();
std::optional<double> metric_value(const MetricsRow& row, const std::string& name);

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quartiles; NaN for an empty sample.
Quartiles quartiles(std::vector<double> values);
double percentile(std::vector<double> values, double p);

enum class ExperimentKind { Init, Interval, Snr };
enum class FitMode { Refine, EndToEnd };

ExperimentKind experiment_kind_from_string(const std::string& s);
std::string to_string(ExperimentKind k);
std::string to_string(FitMode m);
std::string level_name(InitLevel level);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Init;
  int trials = 20;
  std::uint64_t seed = 0;
  std::vector<OrbitType> types = all_orbit_types();
  std::vector<InitLevel> levels = {InitLevel::I, InitLevel::II, InitLevel::III, InitLevel::IV,
                                   InitLevel::V};
  std::vector<FitMode> modes = {FitMode::Refine, FitMode::EndToEnd};
  std::vector<double> gaps = {60.0, 120.0, 240.0};
  std::vector<double> snrs = {4.0, 3.0, 2.0};
  /// Gap held fixed in the init sweep and in the snr sweep.
  double init_gap13 = 60.0;
  double snr_gap13 = 120.0;
  /// SNR held fixed in the init and interval sweeps.
  double fixed_snr = 4.0;
  /// Init level used by refine mode in the interval and snr sweeps.
  InitLevel refine_level = InitLevel::III;
  /// Skip the fit and report init metrics only.
  bool init_only = false;
  int threads = 1;
  ScenarioOptions scenario;
  /// Replaces the interval-based fit settings when set.
  std::optional<FitConfig> fit_override;
};

struct TrialRecord {
  std::string cell;
  int trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsRow init;
  std::optional<MetricsRow> converged;
  double final_loss = 0.0;
  int iterations = 0;
  double runtime_seconds = 0.0;
};

struct QuartileRow {
  std::string cell;
  std::string phase;
  std::string metric;
  Quartiles q;
  int n_trials = 0;
  int n_failures = 0;
};

struct ExperimentResult {
  std::vector<std::string> cells;
  std::vector<TrialRecord> trials;
  std::vector<QuartileRow> table;
};

/// Cell label, e.g. "init level=III type=A" or "snr snr=4 type=C mode=refine".
std::string cell_name(ExperimentKind kind, OrbitType type, const std::string& variable,
                      std::optional<FitMode> mode);

/// Runs every cell of the sweep. Trial t uses seed + t; scenarios are shared
/// across levels and modes. Failures are recorded, never thrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Aggregates trial records into per-cell quartiles for init and converged.
std::vector<QuartileRow> summarize(const std::vector<std::string>& cells,
                                   const std::vector<TrialRecord>& trials);

std::string quartile_csv(const std::vector<QuartileRow>& rows);
std::string trial_csv(const std::vector<TrialRecord>& trials);

/// Separate RNG stream for (seed, purpose, a, b).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t a = 0,
                            std::uint32_t b = 0);

}  // namespace streakfit
