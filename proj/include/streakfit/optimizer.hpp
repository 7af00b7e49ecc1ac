#pragma once

#include <functional>
#include <span>
#include <vector>

#include "streakfit/grid.hpp"
#include "streakfit/orbit.hpp"
#include "streakfit/preprocess.hpp"
#include "streakfit/render.hpp"

namespace streakfit {

/// How the six state components are mapped to optimiser coordinates.
enum class ParamScaling {
  /// x_q = o_q / param_scale_q (km and km/s by default).
  Diagonal,
  /// Whitened by the endpoint Jacobian at the initial state: a unit step in
  /// any coordinate moves the projected streak endpoints by
  /// `endpoint_unit_px` pixels (root sum of squares), and the coordinates are
  /// decorrelated.
  Endpoint,
};

/// Hyperparameters of the coarse-to-fine streak fit. `h` and `step_size` are
/// in optimiser coordinates (see ParamScaling).
struct FitConfig {
  double h = 2e-3;
  double step_size = 0.1;
  double cooldown = 0.5;
  int k_max = 101;
  int k_min = 3;
  double eta = 0.001;
  double gamma = 0.3;
  int ma_window = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int max_iters_per_stage = 500;
  ParamScaling scaling = ParamScaling::Endpoint;
  double endpoint_unit_px = 100.0;
  /// Singular values below this fraction of the largest are raised to it.
  double min_singular_ratio = 1e-3;
  Vec6 param_scale = Vec6::Ones();
  /// Grow k_max so the first kernel spans at least 20% of the largest image diagonal.
  bool auto_kernel = true;
  BlurBorder blur_border = BlurBorder::Normalized;
  int background_kernel = kDefaultBackgroundKernel;
  /// Grow k_max so the initial streak is within reach of every crop.
  bool reach_kernel = true;
  int reach_kernel_cap = 801;
  /// Step halvings tried when an update leaves the bound region.
  int max_step_halvings = 20;
  /// Workers for the finite-difference evaluations.
  int threads = 1;

  /// h and step size interpolated log-log between the tabulated settings for
  /// 30, 60 and 120 s, clamped outside that range.
  static FitConfig for_max_interval(double dt_max_seconds);

  /// Settings used by the tools. Endpoint whitening already absorbs the
  /// interval dependence of the sensitivity, so the 30 s row is used for any
  /// interval; diagonal scaling follows for_max_interval.
  static FitConfig recommended(double dt_max_seconds, ParamScaling scaling = ParamScaling::Endpoint);

  /// Throws InvalidArgument on out-of-range settings.
  void validate() const;
};

/// k_max, then repeatedly floor(k / 2) rounded up to odd, ending with k_min.
std::vector<int> kernel_schedule(int k_max, int k_min);

/// Smallest odd kernel >= k_max covering `fraction` of `diagonal`.
int grow_max_kernel(int k_max, double diagonal, double fraction = 0.2);

struct ObservationSet;
struct OrbitState;

/// Kernel large enough that a k_max blur still reaches each crop from the
/// initial streak: k_max + 2 * (largest endpoint-to-crop distance), odd and
/// capped at `cap`. Returns k_max when the initial streak touches every crop.
int reach_max_kernel(int k_max, const OrbitState& init, const ObservationSet& obs, int cap);

/// Observed images plus the epoch the fitted state is anchored at.
struct ObservationSet {
  std::vector<StreakImage> images;
  double t_initial = 0.0;
};

/// t_initial is the midpoint of the earliest and latest exposure start.
ObservationSet make_observation_set(std::vector<StreakImage> images);

/// Largest |start - t_initial| over the images.
double max_interval(const ObservationSet& obs);

/// Projected pixel positions (sensor coordinates) of the exposure start and
/// end of every image, in image order. Throws GeometryError if a point is
/// behind a camera.
std::vector<Vec2> streak_endpoints(const OrbitState& o, const ObservationSet& obs);

/// d(endpoint pixels) / d(state), 4M x 6, by central differences.
Eigen::MatrixXd endpoint_jacobian(const OrbitState& o, const ObservationSet& obs);

/// Affine map o = offset + transform * x between optimiser coordinates and
/// the state (km, km/s).
struct ParamMap {
  Vec6 offset = Vec6::Zero();
  Eigen::Matrix<double, 6, 6> transform = Eigen::Matrix<double, 6, 6>::Identity();

  Vec6 to_state(const Vec6& x) const { return offset + transform * x; }
  Vec6 to_params(const Vec6& o) const;
};

/// Parameter map for `cfg` around `start`. Endpoint scaling falls back to
/// the diagonal map if the endpoints cannot be projected.
ParamMap make_param_map(const OrbitState& start, const ObservationSet& obs, const FitConfig& cfg);

/// ||generated - observed||_F / pixel count. Throws InvalidArgument on shape mismatch.
double image_loss(const Grid& generated, const Grid& observed);

/// Per-stage preprocessing of every observed image plus the SIR weights.
struct StageData {
  int kernel_size = 1;
  std::vector<PreprocessedImage> images;
  std::vector<double> weights;
};

StageData prepare_stage(const ObservationSet& obs, int k, double eta,
                        BlurBorder border = BlurBorder::Normalized,
                        int background_kernel = kDefaultBackgroundKernel);

/// Per-image loss assigned when the candidate cannot be rendered.
inline constexpr double kFailedImageLoss = 1.0;

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_image;
  bool failed = false;
};

/// Generated image for one observation: render, zero-mask, blur, unit soft
/// peak, scale by the observed streak scale.
void generate_processed(const OrbitState& o, const StreakImage& observed,
                        const PreprocessedImage& prep, Grid& out);

/// Weighted multi-image loss; never throws for bad candidate orbits.
LossBreakdown total_loss(const OrbitState& o, const ObservationSet& obs, const StageData& stage);

struct GradientResult {
  Vec6 gradient = Vec6::Zero();
  /// Set when a perturbed evaluation was not finite; that component is zero.
  bool warning = false;
};

using ScalarFunction = std::function<double(const Vec6&)>;

/// Central differences with per-component step h * scale_q (12 evaluations).
GradientResult central_gradient(const ScalarFunction& f, const Vec6& x, double h,
                                const Vec6& scale = Vec6::Ones(), int threads = 1);

struct AdamState {
  Vec6 m1 = Vec6::Zero();
  Vec6 m2 = Vec6::Zero();
  int iteration = 0;
};

struct AdamStep {
  Vec6 update = Vec6::Zero();
  AdamState state;
};

/// Bias-corrected ADAM; the returned update is to be added to the parameters.
AdamStep adam_step(const Vec6& grad, const AdamState& state, double step_size, double beta1,
                   double beta2, double epsilon = 1e-8);

/// Moving averages of the last `window` entries, one per full window.
std::vector<double> moving_averages(std::span<const double> history, int window);

/// True once the latest moving average of |loss difference| has fallen to
/// gamma times the largest moving average seen. Needs a full window.
bool image_converged(std::span<const double> loss_diffs, double gamma, int window);

/// All images converged (no unconverged image remains).
bool converged(const std::vector<std::vector<double>>& loss_diffs, double gamma, int window);

struct LossRecord {
  int kernel_size = 0;
  int iteration = 0;
  std::vector<double> image_losses;
  double total = 0.0;
  /// State (km, km/s) at which this loss was evaluated.
  Vec6 state = Vec6::Zero();
};

struct FitResult {
  OrbitState initial_state;
  OrbitState final_state;
  std::vector<LossRecord> trace;
  int iterations = 0;
  /// Iteration index at which each kernel stage began.
  std::vector<int> stage_boundaries;
  std::vector<int> stage_kernels;
  /// Loss of the state each stage hands on, under that stage's preprocessing.
  std::vector<double> stage_final_losses;
  /// Loss of the final state under the last stage's preprocessing.
  LossBreakdown final_loss;
  bool gradient_warning = false;
  double runtime_seconds = 0.0;
};

using FitProgress = std::function<void(const LossRecord&)>;

/// Coarse-to-fine ADAM fit of the initial state to the observed images.
/// `init` is propagated to obs.t_initial if its epoch differs. Only malformed
/// inputs throw; a poor fit shows up as a high final loss.
FitResult fit(const ObservationSet& obs, const OrbitState& init, const FitConfig& cfg,
              const FitProgress& progress = {});

}  // namespace streakfit
