#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace streakfit {

/// Row-major image of doubles; (x, y) is column x, row y.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  double max() const;
  double sum() const;
  void fill(double v);
  Grid& operator*=(double s);

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

}  // namespace streakfit
