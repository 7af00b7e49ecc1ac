#include "streakfit/render.hpp"

#include <algorithm>
#include <cmath>

#include "streakfit/errors.hpp"

namespace streakfit {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// 1 at the taper start, 0 at the cutoff, C2 at both ends.
double taper(double r_over_sigma) {
  const double s = (r_over_sigma - kPsfTaperStartSigmas) / (kPsfCutoffSigmas - kPsfTaperStartSigmas);
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  return 1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

}  // namespace

double CropBounds::diagonal() const { return std::hypot(width, height); }

Vec2 corner_pixel(const CropBounds& crop, Corner c) {
  const double left = crop.x0;
  const double right = crop.x0 + crop.width - 1;
  const double top = crop.y0;
  const double bottom = crop.y0 + crop.height - 1;
  switch (c) {
    case Corner::TopLeft: return {left, top};
    case Corner::TopRight: return {right, top};
    case Corner::BottomLeft: return {left, bottom};
    case Corner::BottomRight: return {right, bottom};
  }
  return {left, top};
}

Corner opposite(Corner c) {
  switch (c) {
    case Corner::TopLeft: return Corner::BottomRight;
    case Corner::TopRight: return Corner::BottomLeft;
    case Corner::BottomLeft: return Corner::TopRight;
    case Corner::BottomRight: return Corner::TopLeft;
  }
  return c;
}

void StreakImage::rebuild_frames() { frames = frames_for_window(site, pointing, window, intrinsics); }

double psf_value(const Vec2& u_proj, const Vec2& u_pixel, double sigma) {
  const double r = (u_pixel - u_proj).norm();
  if (r >= kPsfCutoffSigmas * sigma) return 0.0;
  return kInvSqrt2Pi / sigma * std::exp(-r * r / (2.0 * sigma * sigma)) * taper(r / sigma);
}

void splat_psf(Grid& out, const Vec2& u, double sigma) {
  const double radius = kPsfCutoffSigmas * sigma;
  const int xlo = std::max(0, static_cast<int>(std::ceil(u.x() - radius)));
  const int xhi = std::min(out.width() - 1, static_cast<int>(std::floor(u.x() + radius)));
  const int ylo = std::max(0, static_cast<int>(std::ceil(u.y() - radius)));
  const int yhi = std::min(out.height() - 1, static_cast<int>(std::floor(u.y() + radius)));
  if (xlo > xhi || ylo > yhi) return;

  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double r_max2 = radius * radius;
  const double r_taper = kPsfTaperStartSigmas * sigma;
  const double r_taper2 = r_taper * r_taper;
  const double norm = kInvSqrt2Pi / sigma;

  // Separable Gaussian; only the rim needs the radial taper.
  constexpr int kStack = 64;
  double dx2_stack[kStack];
  double ex_stack[kStack];
  std::vector<double> heap;
  const int nx = xhi - xlo + 1;
  double* dx2 = dx2_stack;
  double* ex = ex_stack;
  if (nx > kStack) {
    heap.resize(2 * static_cast<std::size_t>(nx));
    dx2 = heap.data();
    ex = heap.data() + nx;
  }
  for (int i = 0; i < nx; ++i) {
    const double dx = xlo + i - u.x();
    dx2[i] = dx * dx;
    ex[i] = std::exp(-dx2[i] * inv2s2);
  }
  for (int y = ylo; y <= yhi; ++y) {
    const double dy = y - u.y();
    const double dy2 = dy * dy;
    if (dy2 >= r_max2) continue;
    const double row = norm * std::exp(-dy2 * inv2s2);
    double* dst = &out(xlo, y);
    for (int i = 0; i < nx; ++i) {
      const double r2 = dx2[i] + dy2;
      if (r2 >= r_max2) continue;
      double v = row * ex[i];
      if (r2 > r_taper2) v *= taper(std::sqrt(r2) / sigma);
      dst[i] += v;
    }
  }
}

void accumulate_streak(Grid& out, const OrbitState& o, std::span<const CameraFrame> frames,
                       double sigma, const CropBounds& crop, std::vector<Vec2>* path) {
  if (!o.position.allFinite() || !o.velocity.allFinite() || !std::isfinite(o.epoch)) {
    throw InvalidArgument("non-finite orbit state");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("PSF sigma must be positive");
  if (out.width() != crop.width || out.height() != crop.height) {
    out = Grid(crop.width, crop.height);
  }
  const double margin = kPsfCutoffSigmas * sigma + 1.0;
  const Vec2 origin = crop.origin();
  if (path) path->clear();
  for (const CameraFrame& frame : frames) {
    const Vec3 p = propagate_position(o, frame.epoch() - o.epoch);
    if (!p.allFinite()) throw InvalidArgument("propagation produced a non-finite position");
    Vec2 u;
    if (!try_world_to_pixel(p, frame, u)) continue;
    const Vec2 c = u - origin;
    if (path) path->push_back(c);
    if (c.x() < -margin || c.y() < -margin || c.x() > crop.width - 1 + margin ||
        c.y() > crop.height - 1 + margin) {
      continue;
    }
    splat_psf(out, c, sigma);
  }
}

StreakImage render_streak(const OrbitState& o, std::span<const CameraFrame> frames,
                          const ExposureWindow& window, double sigma, const CropBounds& crop) {
  StreakImage img;
  img.pixels = Grid(crop.width, crop.height);
  img.window = window;
  img.frames.assign(frames.begin(), frames.end());
  if (!img.frames.empty()) img.intrinsics = img.frames.front().intrinsics();
  img.psf_sigma = sigma;
  img.crop = crop;
  accumulate_streak(img.pixels, o, frames, sigma, crop, &img.path);
  return img;
}

void normalize_peak(Grid& g) {
  const double m = g.max();
  if (m > 0.0) g *= 1.0 / m;
}

StreakImage inject_holes(const StreakImage& img, std::mt19937_64& rng, int count,
                         double min_diameter, double max_diameter, std::vector<Hole>* holes) {
  StreakImage out = img;
  if (holes) holes->clear();
  if (count <= 0) return out;
  if (!(img.pixels.max() > 0.0)) throw InvalidArgument("cannot place holes on an empty image");

  // Cumulative arc length of the in-crop part of the path.
  std::vector<Vec2> pts;
  for (const Vec2& p : img.path) {
    if (p.x() >= 0 && p.y() >= 0 && p.x() <= img.crop.width - 1 && p.y() <= img.crop.height - 1) {
      pts.push_back(p);
    }
  }
  if (pts.empty()) {
    // No path recorded: fall back to bright pixels.
    const double half = 0.5 * img.pixels.max();
    for (int y = 0; y < img.pixels.height(); ++y) {
      for (int x = 0; x < img.pixels.width(); ++x) {
        if (img.pixels(x, y) >= half) pts.emplace_back(x, y);
      }
    }
  }
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> diam(min_diameter, max_diameter);
  for (int h = 0; h < count; ++h) {
    Vec2 center;
    if (cum.back() > 0.0) {
      const double s = unit(rng) * cum.back();
      const auto it = std::upper_bound(cum.begin(), cum.end(), s);
      const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), pts.size() - 1);
      const std::size_t i = j == 0 ? 0 : j - 1;
      const double seg = cum[j] - cum[i];
      const double w = seg > 0.0 ? (s - cum[i]) / seg : 0.0;
      center = pts[i] + w * (pts[j] - pts[i]);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
      center = pts[pick(rng)];
    }
    const Hole hole{center, diam(rng)};
    cut_holes(out.pixels, std::span(&hole, 1));
    if (holes) holes->push_back(hole);
  }
  return out;
}

void cut_holes(Grid& g, std::span<const Hole> holes) {
  for (const Hole& h : holes) {
    const double r = 0.5 * h.diameter;
    const int xlo = std::max(0, static_cast<int>(std::floor(h.center.x() - r)));
    const int xhi = std::min(g.width() - 1, static_cast<int>(std::ceil(h.center.x() + r)));
    const int ylo = std::max(0, static_cast<int>(std::floor(h.center.y() - r)));
    const int yhi = std::min(g.height() - 1, static_cast<int>(std::ceil(h.center.y() + r)));
    for (int y = ylo; y <= yhi; ++y) {
      for (int x = xlo; x <= xhi; ++x) {
        if ((Vec2(x, y) - h.center).squaredNorm() <= r * r) g(x, y) = 0.0;
      }
    }
  }
}

StreakImage add_gaussian_noise(const StreakImage& img, double sigma_noise, std::mt19937_64& rng) {
  StreakImage out = img;
  out.noise_sigma = sigma_noise;
  if (sigma_noise <= 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma_noise);
  for (double& v : out.pixels.values()) v = std::max(0.0, v + noise(rng));
  return out;
}

}  // namespace streakfit
