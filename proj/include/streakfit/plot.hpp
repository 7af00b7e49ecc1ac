#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streakfit/grid.hpp"
#include "streakfit/render.hpp"

namespace streakfit {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster with clipped drawing primitives.
class Canvas {
 public:
  Canvas(int width, int height, Rgb background = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  void rect(int x0, int y0, int x1, int y1, Rgb c);
  void line(double x0, double y0, double x1, double y1, Rgb c);
  void dot(double x, double y, int radius, Rgb c);
  const std::vector<std::uint8_t>& bytes() const { return rgb_; }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

/// Throws IoError when the file cannot be written.
void write_png(const std::filesystem::path& path, const Canvas& canvas);

/// Grey-scale image (min to max) with projected streak paths drawn over it,
/// one colour per path. Paths are in crop coordinates. `scale` enlarges small crops.
Canvas overlay_plot(const Grid& image, const std::vector<std::vector<Vec2>>& paths,
                    const std::vector<Rgb>& colours, int scale = 2);

/// Line traces on a log10 y axis; non-positive values are skipped. Vertical
/// grey rules mark `markers` (x positions).
Canvas line_plot(const std::vector<std::vector<double>>& series, const std::vector<Rgb>& colours,
                 const std::vector<int>& markers = {}, int width = 800, int height = 400);

struct BoxStats {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

/// One box (Q1 to Q3 with a median bar) per entry on a log10 y axis; boxes
/// are grouped in runs of `group` with a gap between groups.
Canvas box_plot(const std::vector<BoxStats>& boxes, const std::vector<Rgb>& colours, int group = 1,
                int height = 400);

/// Categorical palette.
Rgb palette(std::size_t i);

}  // namespace streakfit
