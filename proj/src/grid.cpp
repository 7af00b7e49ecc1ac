#include "streakfit/grid.hpp"

#include <algorithm>
#include <numeric>

#include "streakfit/errors.hpp"

namespace streakfit {

Grid::Grid(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidArgument("grid dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

double Grid::max() const {
  if (data_.empty()) return 0.0;
  return *std::max_element(data_.begin(), data_.end());
}

double Grid::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Grid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Grid& Grid::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

}  // namespace streakfit
