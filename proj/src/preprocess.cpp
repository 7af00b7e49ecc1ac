#include "streakfit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "streakfit/errors.hpp"

namespace streakfit {

void box_blur_into(const Grid& img, int k, Grid& out, std::vector<double>& scratch, BlurBorder border) {
  if (k < 1 || k % 2 == 0) throw InvalidArgument("blur kernel size must be odd and positive");
  const int w = img.width();
  const int h = img.height();
  if (!out.same_shape(img)) out = Grid(w, h);
  if (k == 1) {
    std::copy(img.data(), img.data() + img.size(), out.data());
    return;
  }
  const int r = k / 2;
  scratch.assign(img.size(), 0.0);

  const bool normalized = border == BlurBorder::Normalized;
  auto in_bounds = [r](int i, int n) { return std::min(i + r, n - 1) - std::max(i - r, 0) + 1; };

  // Horizontal running sums over a zero-padded row.
  for (int y = 0; y < h; ++y) {
    const double* src = img.data() + static_cast<std::size_t>(y) * w;
    double* dst = scratch.data() + static_cast<std::size_t>(y) * w;
    double acc = 0.0;
    for (int x = 0; x <= std::min(r, w - 1); ++x) acc += src[x];
    for (int x = 0; x < w; ++x) {
      dst[x] = normalized ? acc / in_bounds(x, w) : acc;
      const int add = x + r + 1;
      const int drop = x - r;
      if (add < w) acc += src[add];
      if (drop >= 0) acc -= src[drop];
    }
  }

  // Vertical running sums, column-interleaved for locality.
  const double inv_zero = 1.0 / (static_cast<double>(k) * k);
  std::vector<double> acc(static_cast<std::size_t>(w), 0.0);
  for (int y = 0; y <= std::min(r, h - 1); ++y) {
    const double* row = scratch.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) acc[x] += row[x];
  }
  for (int y = 0; y < h; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    const double inv = normalized ? 1.0 / in_bounds(y, h) : inv_zero;
    for (int x = 0; x < w; ++x) dst[x] = acc[x] * inv;
    const int add = y + r + 1;
    const int drop = y - r;
    if (add < h) {
      const double* row = scratch.data() + static_cast<std::size_t>(add) * w;
      for (int x = 0; x < w; ++x) acc[x] += row[x];
    }
    if (drop >= 0) {
      const double* row = scratch.data() + static_cast<std::size_t>(drop) * w;
      for (int x = 0; x < w; ++x) acc[x] -= row[x];
    }
  }
}

Grid box_blur(const Grid& img, int k, BlurBorder border) {
  Grid out;
  std::vector<double> scratch;
  box_blur_into(img, k, out, scratch, border);
  return out;
}

double median(std::span<const double> values) {
  std::vector<double> buffer;
  return median(values, buffer);
}

double median(std::span<const double> values, std::vector<double>& v) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  v.assign(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double estimate_background(const Grid& blurred) { return median(blurred.values()); }

Grid clamp_background(const Grid& blurred, double beta) {
  if (beta < 0.0) throw InvalidArgument("background level must be non-negative");
  Grid out = blurred;
  for (double& v : out.values()) v = std::max(v - beta, 0.0);
  return out;
}

Grid subtract_background(const Grid& blurred, double beta) {
  Grid out = clamp_background(blurred, beta);
  const double m = out.max();
  if (!(m > 0.0)) throw InvalidArgument("no signal above the background level");
  for (double& v : out.values()) v /= m;
  return out;
}

double streak_scale(const Grid& img, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in (0, 1)");
  if (img.empty()) throw InvalidArgument("empty image");
  const auto count = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(img.size()) - 1e-9));
  const std::size_t n = std::clamp<std::size_t>(count, 1, img.size());
  std::vector<double> v(img.values().begin(), img.values().end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n - 1), v.end(),
                   std::greater<>());
  return median(std::span<const double>(v.data(), n));
}

double compute_sir(const Grid& img, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("streak scale must be positive");
  const auto vals = img.values();
  const auto hits = std::count_if(vals.begin(), vals.end(), [alpha](double v) { return v >= alpha; });
  if (hits == 0) throw InvalidArgument("no pixel reaches the streak scale");
  return static_cast<double>(hits) / static_cast<double>(vals.size());
}

std::vector<double> compute_weights(std::span<const double> sirs) {
  if (sirs.empty()) return {};
  for (double s : sirs) {
    if (!(s > 0.0)) throw InvalidArgument("SIR values must be positive");
  }
  const double top = *std::max_element(sirs.begin(), sirs.end());
  std::vector<double> out;
  out.reserve(sirs.size());
  for (double s : sirs) out.push_back(top / s);
  return out;
}

Grid zero_mask(const Grid& observed) {
  Grid mask(observed.width(), observed.height());
  const auto src = observed.values();
  auto dst = mask.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == 0.0 ? 0.0 : 1.0;
  return mask;
}

PreprocessedImage preprocess(const Grid& observed, int k, double eta, BlurBorder border,
                             int background_kernel) {
  if (background_kernel < 1 || background_kernel % 2 == 0) {
    throw InvalidArgument("background kernel must be odd and positive");
  }
  PreprocessedImage out;
  out.kernel_size = k;
  out.border = border;
  out.zero_mask = zero_mask(observed);
  const Grid blurred = box_blur(observed, k, border);
  const int kb = std::min(k, background_kernel);
  out.background = estimate_background(kb == k ? blurred : box_blur(observed, kb, border));
  out.pixels = subtract_background(blurred, out.background);
  out.streak_scale = streak_scale(out.pixels, eta);
  out.sir = compute_sir(out.pixels, out.streak_scale);
  return out;
}

}  // namespace streakfit
