#pragma once

#include <span>
#include <vector>

#include "streakfit/grid.hpp"

namespace streakfit {

/// Border handling of the box blur.
enum class BlurBorder {
  /// Outside pixels count as zero; the sum is divided by k * k.
  Zero,
  /// Mean over the part of the window inside the image, so a flat
  /// background stays flat up to the border.
  Normalized,
};

/// Mean over the k x k neighbourhood. Throws InvalidArgument for even or
/// non-positive k.
Grid box_blur(const Grid& img, int k, BlurBorder border = BlurBorder::Zero);

/// Writes the blur into `out` (resized as needed); `scratch` is reused.
void box_blur_into(const Grid& img, int k, Grid& out, std::vector<double>& scratch,
                   BlurBorder border = BlurBorder::Zero);

/// Exact median of all pixel values (mean of the middle pair for even counts).
double median(std::span<const double> values);
/// Same, reusing `buffer` for the partial sort.
double median(std::span<const double> values, std::vector<double>& buffer);
double estimate_background(const Grid& blurred);

/// Per-pixel max(v - beta, 0) without rescaling.
Grid clamp_background(const Grid& blurred, double beta);

/// max(v - beta, 0) rescaled so the brightest pixel is 1. Throws
/// InvalidArgument if nothing exceeds the background.
Grid subtract_background(const Grid& blurred, double beta);

/// Median of the brightest ceil(eta * |img|) pixels; eta is a fraction.
double streak_scale(const Grid& img, double eta);

/// Fraction of pixels at or above alpha. Throws InvalidArgument when no pixel
/// qualifies.
double compute_sir(const Grid& img, double alpha);

/// lambda_m = max(sir) / sir_m.
std::vector<double> compute_weights(std::span<const double> sirs);

/// 0 where the observed pixel is exactly zero, 1 elsewhere.
Grid zero_mask(const Grid& observed);

/// Observed image conditioned for one kernel stage.
struct PreprocessedImage {
  Grid pixels;             ///< blurred, background-subtracted, unit maximum
  double background = 0.0;
  double streak_scale = 0.0;
  double sir = 0.0;
  Grid zero_mask;
  int kernel_size = 1;
  BlurBorder border = BlurBorder::Normalized;
};

/// Background is estimated on a blur no wider than this; with wider kernels
/// the streak covers most of a small crop and the median stops being a
/// background estimate.
inline constexpr int kDefaultBackgroundKernel = 15;

/// Mask from the raw image, then blur, background subtraction and scale
/// estimation, in that order. The background is the median of the image
/// blurred with min(k, background_kernel).
PreprocessedImage preprocess(const Grid& observed, int k, double eta,
                             BlurBorder border = BlurBorder::Normalized,
                             int background_kernel = kDefaultBackgroundKernel);

}  // namespace streakfit
