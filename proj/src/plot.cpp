#include "streakfit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <png.h>

#include "streakfit/errors.hpp"

namespace streakfit {

namespace {

constexpr Rgb kAxis = {60, 60, 60};
constexpr Rgb kRule = {200, 200, 200};
constexpr int kPad = 30;

struct LogRange {
  double lo = 0.0;
  double hi = 1.0;
};

LogRange log_range(double lo, double hi) {
  if (!(lo > 0.0) || !std::isfinite(lo) || !std::isfinite(hi)) return {};
  LogRange r{std::floor(std::log10(lo)), std::ceil(std::log10(hi))};
  if (r.hi <= r.lo) r.hi = r.lo + 1.0;
  return r;
}

void decade_rules(Canvas& c, const LogRange& r, int x0, int x1, int y0, int y1) {
  for (double d = r.lo; d <= r.hi + 1e-9; d += 1.0) {
    const double y = y1 - (d - r.lo) / (r.hi - r.lo) * (y1 - y0);
    c.line(x0, y, x1, y, kRule);
  }
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background)
    : width_(width), height_(height), rgb_(static_cast<std::size_t>(width) * height * 3) {
  if (width < 1 || height < 1) throw InvalidArgument("canvas must be at least 1x1");
  for (std::size_t i = 0; i < rgb_.size(); i += 3) std::copy(background.begin(), background.end(), rgb_.begin() + i);
}

Rgb Canvas::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  std::copy(c.begin(), c.end(), rgb_.begin() + i);
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = std::max(y0, 0); y <= std::min(y1, height_ - 1); ++y) {
    for (int x = std::max(x0, 0); x <= std::min(x1, width_ - 1); ++x) set(x, y, c);
  }
}

void Canvas::rect(int x0, int y0, int x1, int y1, Rgb c) {
  line(x0, y0, x1, y0, c);
  line(x1, y0, x1, y1, c);
  line(x1, y1, x0, y1, c);
  line(x0, y1, x0, y0, c);
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c) {
  const double n = std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)));
  if (!std::isfinite(n) || n > 1e6) return;
  for (int i = 0; i <= static_cast<int>(n); ++i) {
    const double t = n > 0 ? i / n : 0.0;
    set(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), c);
  }
}

void Canvas::dot(double x, double y, int radius, Rgb c) {
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) set(cx + dx, cy + dy, c);
    }
  }
}

void write_png(const std::filesystem::path& path, const Canvas& canvas) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, canvas.width(), canvas.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto& rgb = canvas.bytes();
  for (int y = 0; y < canvas.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * canvas.width() * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Canvas overlay_plot(const Grid& image, const std::vector<std::vector<Vec2>>& paths,
                    const std::vector<Rgb>& colours, int scale) {
  if (image.empty()) throw InvalidArgument("empty image");
  scale = std::max(scale, 1);
  Canvas c(image.width() * scale, image.height() * scale);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : image.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * (image(x, y) - lo) / span));
      c.fill_rect(x * scale, y * scale, x * scale + scale - 1, y * scale + scale - 1, {g, g, g});
    }
  }
  const double half = 0.5 * (scale - 1);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const Rgb col = p < colours.size() ? colours[p] : palette(p);
    const auto& path = paths[p];
    for (std::size_t i = 1; i < path.size(); ++i) {
      c.line(path[i - 1].x() * scale + half, path[i - 1].y() * scale + half, path[i].x() * scale + half,
             path[i].y() * scale + half, col);
    }
    if (!path.empty()) c.dot(path.front().x() * scale + half, path.front().y() * scale + half, 2, col);
  }
  return c;
}

Canvas line_plot(const std::vector<std::vector<double>>& series, const std::vector<Rgb>& colours,
                 const std::vector<int>& markers, int width, int height) {
  Canvas c(width, height);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.size());
    for (double v : s) {
      if (v > 0.0 && std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const int x0 = kPad, x1 = width - kPad, y0 = kPad, y1 = height - kPad;
  const LogRange r = log_range(lo, hi);
  decade_rules(c, r, x0, x1, y0, y1);
  auto px = [&](double i) { return x0 + i / std::max<double>(n - 1, 1) * (x1 - x0); };
  auto py = [&](double v) { return y1 - (std::log10(v) - r.lo) / (r.hi - r.lo) * (y1 - y0); };
  for (int m : markers) c.line(px(m), y0, px(m), y1, kRule);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Rgb col = k < colours.size() ? colours[k] : palette(k);
    const auto& s = series[k];
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i - 1] > 0.0 && s[i] > 0.0) c.line(px(i - 1), py(s[i - 1]), px(i), py(s[i]), col);
    }
  }
  c.rect(x0, y0, x1, y1, kAxis);
  return c;
}

Canvas box_plot(const std::vector<BoxStats>& boxes, const std::vector<Rgb>& colours, int group,
                int height) {
  group = std::max(group, 1);
  const int box_w = 14;
  const int gap = 4;
  const int group_gap = 18;
  const int groups = static_cast<int>((boxes.size() + group - 1) / group);
  const int width = 2 * kPad + static_cast<int>(boxes.size()) * (box_w + gap) + std::max(groups - 1, 0) * group_gap;
  Canvas c(std::max(width, 2 * kPad + 1), height);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const BoxStats& b : boxes) {
    for (double v : {b.q1, b.q2, b.q3}) {
      if (v > 0.0 && std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const int y0 = kPad, y1 = height - kPad;
  const LogRange r = log_range(lo, hi);
  decade_rules(c, r, kPad, c.width() - kPad, y0, y1);
  auto py = [&](double v) {
    const double t = v > 0.0 ? (std::log10(v) - r.lo) / (r.hi - r.lo) : 0.0;
    return static_cast<int>(std::lround(y1 - std::clamp(t, 0.0, 1.0) * (y1 - y0)));
  };
  int x = kPad;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i > 0 && i % group == 0) x += group_gap;
    const BoxStats& b = boxes[i];
    const Rgb col = i < colours.size() ? colours[i] : palette(i % group);
    if (std::isfinite(b.q1) && std::isfinite(b.q3)) {
      c.fill_rect(x, py(b.q3), x + box_w - 1, py(b.q1), col);
      c.rect(x, py(b.q3), x + box_w - 1, py(b.q1), kAxis);
      c.fill_rect(x, py(b.q2) - 1, x + box_w - 1, py(b.q2), {0, 0, 0});
    }
    x += box_w + gap;
  }
  c.rect(kPad, y0, c.width() - kPad, y1, kAxis);
  return c;
}

Rgb palette(std::size_t i) {
  static constexpr std::array<Rgb, 6> colours = {{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                                   {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};
  return colours[i % colours.size()];
}

}  // namespace streakfit
