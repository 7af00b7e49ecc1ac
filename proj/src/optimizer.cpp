#include "streakfit/optimizer.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "streakfit/errors.hpp"
#include "streakfit/parallel.hpp"

namespace streakfit {

namespace {

struct TableRow {
  double dt_max;
  double h;
  double step;
};

constexpr std::array<TableRow, 3> kHyperTable{{
    {30.0, 2e-3, 0.1},
    {60.0, 4e-4, 0.02},
    {120.0, 2e-4, 0.01},
}};

double log_interp(double x, double x0, double x1, double y0, double y1) {
  const double t = (std::log(x) - std::log(x0)) / (std::log(x1) - std::log(x0));
  return std::exp(std::log(y0) + t * (std::log(y1) - std::log(y0)));
}

// Scratch buffers reused across evaluations on the same thread.
struct Scratch {
  Grid render;
  Grid blurred;
  std::vector<double> blur_tmp;
};

Scratch& thread_scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

FitConfig FitConfig::for_max_interval(double dt_max) {
  FitConfig cfg;
  if (!(dt_max > 0.0)) throw InvalidArgument("maximum interval must be positive");
  if (dt_max <= kHyperTable.front().dt_max) {
    cfg.h = kHyperTable.front().h;
    cfg.step_size = kHyperTable.front().step;
  } else if (dt_max >= kHyperTable.back().dt_max) {
    cfg.h = kHyperTable.back().h;
    cfg.step_size = kHyperTable.back().step;
  } else {
    for (std::size_t i = 0; i + 1 < kHyperTable.size(); ++i) {
      const TableRow& a = kHyperTable[i];
      const TableRow& b = kHyperTable[i + 1];
      if (dt_max <= b.dt_max) {
        cfg.h = log_interp(dt_max, a.dt_max, b.dt_max, a.h, b.h);
        cfg.step_size = log_interp(dt_max, a.dt_max, b.dt_max, a.step, b.step);
        break;
      }
    }
  }
  return cfg;
}

FitConfig FitConfig::recommended(double dt_max, ParamScaling scaling) {
  FitConfig cfg = for_max_interval(scaling == ParamScaling::Endpoint ? kHyperTable.front().dt_max : dt_max);
  cfg.scaling = scaling;
  return cfg;
}

void FitConfig::validate() const {
  if (!(h > 0.0)) throw InvalidArgument("h must be positive");
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  if (!(cooldown > 0.0 && cooldown <= 1.0)) throw InvalidArgument("cooldown must lie in (0, 1]");
  if (k_min < 3 || k_min % 2 == 0) throw InvalidArgument("k_min must be odd and >= 3");
  if (k_max < k_min || k_max % 2 == 0) throw InvalidArgument("k_max must be odd and >= k_min");
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
  if (ma_window < 1) throw InvalidArgument("moving-average window must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("ADAM decay rates must lie in [0, 1)");
  }
  if (max_iters_per_stage < 1) throw InvalidArgument("max_iters_per_stage must be >= 1");
  if (!(param_scale.array() > 0.0).all()) throw InvalidArgument("parameter scales must be positive");
  if (max_step_halvings < 0) throw InvalidArgument("max_step_halvings must be non-negative");
  if (reach_kernel_cap < 1 || reach_kernel_cap % 2 == 0) {
    throw InvalidArgument("reach kernel cap must be odd and positive");
  }
  if (background_kernel < 1 || background_kernel % 2 == 0) {
    throw InvalidArgument("background kernel must be odd and positive");
  }
  if (!(endpoint_unit_px > 0.0)) throw InvalidArgument("endpoint unit must be positive");
  if (!(min_singular_ratio > 0.0 && min_singular_ratio <= 1.0)) {
    throw InvalidArgument("singular value floor must lie in (0, 1]");
  }
}

std::vector<int> kernel_schedule(int k_max, int k_min) {
  if (k_min < 1 || k_min % 2 == 0 || k_max < k_min || k_max % 2 == 0) {
    throw InvalidArgument("kernel sizes must be odd with k_max >= k_min >= 1");
  }
  std::vector<int> out{k_max};
  int k = k_max;
  while (k > k_min) {
    k = std::max((k / 2) | 1, k_min);
    out.push_back(k);
  }
  return out;
}

int grow_max_kernel(int k_max, double diagonal, double fraction) {
  int k = static_cast<int>(std::ceil(fraction * diagonal));
  if (k % 2 == 0) ++k;
  return std::max(k_max, k);
}

ObservationSet make_observation_set(std::vector<StreakImage> images) {
  if (images.empty()) throw InvalidArgument("at least one observation is required");
  double first = std::numeric_limits<double>::infinity();
  double last = -std::numeric_limits<double>::infinity();
  for (const StreakImage& img : images) {
    if (img.frames.size() != static_cast<std::size_t>(img.window.steps) + 1) {
      throw InvalidArgument("frame count does not match the exposure window");
    }
    first = std::min(first, img.window.start);
    last = std::max(last, img.window.start);
  }
  ObservationSet obs;
  obs.images = std::move(images);
  obs.t_initial = 0.5 * (first + last);
  return obs;
}

double max_interval(const ObservationSet& obs) {
  double out = 0.0;
  for (const StreakImage& img : obs.images) out = std::max(out, std::abs(img.window.start - obs.t_initial));
  return out;
}

double image_loss(const Grid& generated, const Grid& observed) {
  if (!generated.same_shape(observed)) throw InvalidArgument("image shapes differ");
  if (observed.empty()) throw InvalidArgument("empty image");
  const double* a = generated.data();
  const double* b = observed.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc) / static_cast<double>(observed.size());
}

StageData prepare_stage(const ObservationSet& obs, int k, double eta, BlurBorder border,
                        int background_kernel) {
  StageData stage;
  stage.kernel_size = k;
  std::vector<double> sirs;
  for (const StreakImage& img : obs.images) {
    stage.images.push_back(preprocess(img.pixels, k, eta, border, background_kernel));
    sirs.push_back(stage.images.back().sir);
  }
  stage.weights = compute_weights(sirs);
  return stage;
}

namespace {

// sum g^129 / sum g^128: a power mean close enough to the max to keep the
// amplitude match, but without the kink where the brightest pixel changes.
double soft_peak(const Grid& g) {
  const double m = g.max();
  if (!(m > 0.0)) return 0.0;
  double sp = 0.0;
  double sp1 = 0.0;
  for (double v : g.values()) {
    const double u = v / m;
    double up = u;
    for (int i = 0; i < 7; ++i) up *= up;
    sp += up;
    sp1 += up * u;
  }
  return m * sp1 / sp;
}

struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
};

Box nonzero_box(const Grid& g) {
  Box b{g.width(), g.height(), -1, -1};
  for (int y = 0; y < g.height(); ++y) {
    const double* row = g.data() + static_cast<std::size_t>(y) * g.width();
    for (int x = 0; x < g.width(); ++x) {
      if (row[x] != 0.0) {
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
        b.y0 = std::min(b.y0, y);
        b.y1 = std::max(b.y1, y);
      }
    }
  }
  return b;
}

// k x k window sums of a canvas padded by r = k / 2 on every side, written
// for the inner (unpadded) region only. Work is limited to the neighbourhood
// of the canvas's non-zero pixels.
void padded_window_sums(const Grid& canvas, int k, Grid& out, std::vector<double>& rows, Box& touched) {
  const int r = k / 2;
  const int w = canvas.width() - 2 * r;
  const int h = canvas.height() - 2 * r;
  if (out.width() != w || out.height() != h) {
    out = Grid(w, h);
  } else {
    out.fill(0.0);
  }
  const Box nz = nonzero_box(canvas);
  touched = Box{};
  if (nz.empty()) return;
  const int ox0 = std::max(0, nz.x0 - 2 * r);
  const int ox1 = std::min(w - 1, nz.x1);
  const int oy0 = std::max(0, nz.y0 - 2 * r);
  const int oy1 = std::min(h - 1, nz.y1);
  if (ox1 < ox0 || oy1 < oy0) return;
  touched = Box{ox0, oy0, ox1, oy1};
  if (r == 0) {
    // No blur; running sums would leave rounding residue in masked pixels.
    std::copy(canvas.data(), canvas.data() + canvas.size(), out.data());
    return;
  }
  const int span = ox1 - ox0 + 1;

  // Horizontal sums for the canvas rows holding signal.
  const int rows_n = nz.y1 - nz.y0 + 1;
  rows.assign(static_cast<std::size_t>(rows_n) * span, 0.0);
  for (int cy = nz.y0; cy <= nz.y1; ++cy) {
    const double* src = canvas.data() + static_cast<std::size_t>(cy) * canvas.width();
    double* dst = rows.data() + static_cast<std::size_t>(cy - nz.y0) * span;
    double acc = 0.0;
    for (int c = ox0; c <= ox0 + 2 * r; ++c) acc += src[c];
    for (int x = ox0; x <= ox1; ++x) {
      dst[x - ox0] = acc;
      if (x + 1 <= ox1) acc += src[x + 2 * r + 1] - src[x];
    }
  }
  // Vertical sums; canvas rows outside [nz.y0, nz.y1] are zero.
  std::vector<double> acc(static_cast<std::size_t>(span), 0.0);
  auto row_ptr = [&](int cy) -> const double* {
    if (cy < nz.y0 || cy > nz.y1) return nullptr;
    return rows.data() + static_cast<std::size_t>(cy - nz.y0) * span;
  };
  for (int cy = oy0; cy <= oy0 + 2 * r; ++cy) {
    if (const double* p = row_ptr(cy)) {
      for (int i = 0; i < span; ++i) acc[i] += p[i];
    }
  }
  for (int y = oy0; y <= oy1; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * w + ox0;
    for (int i = 0; i < span; ++i) dst[i] = acc[i];
    if (y + 1 <= oy1) {
      if (const double* p = row_ptr(y + 2 * r + 1)) {
        for (int i = 0; i < span; ++i) acc[i] += p[i];
      }
      if (const double* p = row_ptr(y)) {
        for (int i = 0; i < span; ++i) acc[i] -= p[i];
      }
    }
  }
}

}  // namespace

void generate_processed(const OrbitState& o, const StreakImage& observed,
                        const PreprocessedImage& prep, Grid& out) {
  Scratch& s = thread_scratch();
  const int k = prep.kernel_size;
  const int r = k / 2;
  const CropBounds& crop = observed.crop;
  // The render extends k / 2 beyond the crop so that flux just outside the
  // observed region still reaches the blurred crop and keeps the gradient
  // informative when a candidate streak drifts out of view.
  const CropBounds canvas{crop.x0 - r, crop.y0 - r, crop.width + 2 * r, crop.height + 2 * r};
  if (s.render.width() != canvas.width || s.render.height() != canvas.height) {
    s.render = Grid(canvas.width, canvas.height);
  } else {
    s.render.fill(0.0);
  }
  accumulate_streak(s.render, o, observed.frames, observed.psf_sigma, canvas);
  for (int y = 0; y < crop.height; ++y) {
    double* row = s.render.data() + static_cast<std::size_t>(y + r) * canvas.width + r;
    const double* mask = prep.zero_mask.data() + static_cast<std::size_t>(y) * crop.width;
    for (int x = 0; x < crop.width; ++x) row[x] *= mask[x];
  }

  Box touched;
  padded_window_sums(s.render, k, out, s.blur_tmp, touched);
  if (touched.empty()) return;
  // Window sums to means, matching the observed side's border handling.
  auto in_crop = [r](int i, int n) { return std::min(i + r, n - 1) - std::max(i - r, 0) + 1; };
  const double inv_k2 = 1.0 / (static_cast<double>(k) * k);
  for (int y = touched.y0; y <= touched.y1; ++y) {
    double* row = out.data() + static_cast<std::size_t>(y) * crop.width;
    const int cy = in_crop(y, crop.height);
    for (int x = touched.x0; x <= touched.x1; ++x) {
      row[x] *= prep.border == BlurBorder::Normalized ? 1.0 / (static_cast<double>(cy) * in_crop(x, crop.width))
                                                      : inv_k2;
    }
  }

  const double peak = soft_peak(out);
  if (peak > 0.0) out *= prep.streak_scale / peak;
}

LossBreakdown total_loss(const OrbitState& o, const ObservationSet& obs, const StageData& stage) {
  LossBreakdown out;
  out.per_image.resize(obs.images.size());
  Scratch& s = thread_scratch();
  for (std::size_t m = 0; m < obs.images.size(); ++m) {
    double loss = kFailedImageLoss;
    try {
      generate_processed(o, obs.images[m], stage.images[m], s.blurred);
      loss = image_loss(s.blurred, stage.images[m].pixels);
      if (!std::isfinite(loss)) loss = kFailedImageLoss;
    } catch (const Error&) {
      out.failed = true;
    }
    out.per_image[m] = loss;
    out.total += stage.weights[m] * loss;
  }
  return out;
}

GradientResult central_gradient(const ScalarFunction& f, const Vec6& x, double h, const Vec6& scale,
                                int threads) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  std::array<double, 12> values{};
  parallel_for(12, threads, [&](std::size_t i) {
    const int q = static_cast<int>(i / 2);
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    Vec6 xp = x;
    xp[q] += sign * h * scale[q];
    values[i] = f(xp);
  });
  GradientResult out;
  for (int q = 0; q < 6; ++q) {
    const double plus = values[2 * static_cast<std::size_t>(q)];
    const double minus = values[2 * static_cast<std::size_t>(q) + 1];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      out.warning = true;
      out.gradient[q] = 0.0;
      continue;
    }
    out.gradient[q] = (plus - minus) / (2.0 * h * scale[q]);
  }
  return out;
}

AdamStep adam_step(const Vec6& grad, const AdamState& state, double step_size, double beta1,
                   double beta2, double epsilon) {
  AdamStep out;
  out.state.iteration = state.iteration + 1;
  out.state.m1 = beta1 * state.m1 + (1.0 - beta1) * grad;
  out.state.m2 = beta2 * state.m2 + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, out.state.iteration);
  const double c2 = 1.0 - std::pow(beta2, out.state.iteration);
  const Vec6 m_hat = out.state.m1 / c1;
  const Vec6 v_hat = out.state.m2 / c2;
  out.update = -step_size * m_hat.array() / (v_hat.array().sqrt() + epsilon);
  return out;
}

std::vector<double> moving_averages(std::span<const double> history, int window) {
  if (window < 1) throw InvalidArgument("moving-average window must be >= 1");
  std::vector<double> out;
  const auto v = static_cast<std::size_t>(window);
  if (history.size() < v) return out;
  for (std::size_t end = v; end <= history.size(); ++end) {
    double acc = 0.0;
    for (std::size_t j = end - v; j < end; ++j) acc += history[j];
    out.push_back(acc / window);
  }
  return out;
}

bool image_converged(std::span<const double> loss_diffs, double gamma, int window) {
  const std::vector<double> ma = moving_averages(loss_diffs, window);
  if (ma.empty()) return false;
  const double peak = *std::max_element(ma.begin(), ma.end());
  return ma.back() <= gamma * peak;
}

bool converged(const std::vector<std::vector<double>>& loss_diffs, double gamma, int window) {
  if (loss_diffs.empty()) return false;
  return std::all_of(loss_diffs.begin(), loss_diffs.end(), [&](const std::vector<double>& h) {
    return image_converged(h, gamma, window);
  });
}

std::vector<Vec2> streak_endpoints(const OrbitState& o, const ObservationSet& obs) {
  std::vector<Vec2> out;
  for (const StreakImage& img : obs.images) {
    if (img.frames.empty()) throw InvalidArgument("image has no camera frames");
    for (const CameraFrame* f : {&img.frames.front(), &img.frames.back()}) {
      out.push_back(world_to_pixel(propagate_position(o, f->epoch() - o.epoch), *f));
    }
  }
  return out;
}

int reach_max_kernel(int k_max, const OrbitState& init, const ObservationSet& obs, int cap) {
  std::vector<Vec2> ends;
  try {
    ends = streak_endpoints(init, obs);
  } catch (const Error&) {
    return k_max;
  }
  double worst = 0.0;
  for (std::size_t m = 0; m < obs.images.size(); ++m) {
    const CropBounds& c = obs.images[m].crop;
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec2& u : {ends[2 * m], ends[2 * m + 1]}) {
      const double dx = std::max({c.x0 - u.x(), 0.0, u.x() - (c.x0 + c.width)});
      const double dy = std::max({c.y0 - u.y(), 0.0, u.y() - (c.y0 + c.height)});
      nearest = std::min(nearest, std::hypot(dx, dy));
    }
    worst = std::max(worst, nearest);
  }
  if (!std::isfinite(worst)) return k_max;
  int k = static_cast<int>(std::min<double>(k_max + 2.0 * std::ceil(worst), cap));
  if (k % 2 == 0) --k;
  return std::max(k_max, k);
}

Eigen::MatrixXd endpoint_jacobian(const OrbitState& o, const ObservationSet& obs) {
  const std::size_t rows = 4 * obs.images.size();
  Eigen::MatrixXd j(static_cast<Eigen::Index>(rows), 6);
  const Vec6 x = o.as_vector();
  for (int q = 0; q < 6; ++q) {
    const double d = q < 3 ? 1e-3 : 1e-6;
    Vec6 xp = x;
    Vec6 xm = x;
    xp[q] += d;
    xm[q] -= d;
    const std::vector<Vec2> up = streak_endpoints(OrbitState::from_vector(o.epoch, xp), obs);
    const std::vector<Vec2> um = streak_endpoints(OrbitState::from_vector(o.epoch, xm), obs);
    for (std::size_t i = 0; i < up.size(); ++i) {
      const Vec2 g = (up[i] - um[i]) / (2.0 * d);
      j(static_cast<Eigen::Index>(2 * i), q) = g.x();
      j(static_cast<Eigen::Index>(2 * i + 1), q) = g.y();
    }
  }
  return j;
}

Vec6 ParamMap::to_params(const Vec6& o) const { return transform.partialPivLu().solve(o - offset); }

ParamMap make_param_map(const OrbitState& start, const ObservationSet& obs, const FitConfig& cfg) {
  ParamMap diag;
  diag.transform = cfg.param_scale.asDiagonal();
  if (cfg.scaling == ParamScaling::Diagonal) return diag;
  Eigen::MatrixXd j;
  try {
    j = endpoint_jacobian(start, obs);
  } catch (const Error&) {
    return diag;
  }
  if (!j.allFinite()) return diag;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv[0] > 0.0)) return diag;
  ParamMap map;
  map.offset = start.as_vector();
  for (int q = 0; q < 6; ++q) {
    const double s = std::max(sv[q], cfg.min_singular_ratio * sv[0]);
    map.transform.col(q) = svd.matrixV().col(q) * (cfg.endpoint_unit_px / s);
  }
  return map;
}

namespace {

bool admissible(const Vec6& state) {
  if (!state.allFinite()) return false;
  const OrbitState o = OrbitState::from_vector(0.0, state);
  return o.energy() < 0.0 && o.position.norm() > kEarthRadius;
}

}  // namespace

FitResult fit(const ObservationSet& obs, const OrbitState& init, const FitConfig& cfg,
              const FitProgress& progress) {
  cfg.validate();
  if (obs.images.empty()) throw InvalidArgument("no observations to fit");
  const auto started = std::chrono::steady_clock::now();

  OrbitState start = init;
  if (start.epoch != obs.t_initial) start = propagate_kepler(init, obs.t_initial - init.epoch);
  if (!start.position.allFinite() || !start.velocity.allFinite()) {
    throw InvalidArgument("initial state is not finite");
  }

  int k_max = cfg.k_max;
  if (cfg.auto_kernel) {
    double diag = 0.0;
    for (const StreakImage& img : obs.images) diag = std::max(diag, img.crop.diagonal());
    k_max = grow_max_kernel(k_max, diag);
  }
  if (cfg.reach_kernel) k_max = reach_max_kernel(k_max, start, obs, cfg.reach_kernel_cap);
  const std::vector<int> schedule = kernel_schedule(k_max, cfg.k_min);

  const ParamMap map = make_param_map(start, obs, cfg);
  Vec6 x = map.to_params(start.as_vector());
  const double epoch = obs.t_initial;
  const std::size_t num_images = obs.images.size();

  FitResult result;
  result.initial_state = start;
  double step = cfg.step_size;
  int iteration = 0;
  StageData stage;

  for (int k : schedule) {
    stage = prepare_stage(obs, k, cfg.eta, cfg.blur_border, cfg.background_kernel);
    result.stage_boundaries.push_back(iteration);
    result.stage_kernels.push_back(k);

    const ScalarFunction objective = [&](const Vec6& xs) {
      return total_loss(OrbitState::from_vector(epoch, map.to_state(xs)), obs, stage).total;
    };

    std::vector<std::vector<double>> diffs(num_images);
    std::vector<double> previous;
    AdamState adam;
    Vec6 best_x = x;
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iters_per_stage; ++it) {
      if (converged(diffs, cfg.gamma, cfg.ma_window)) break;

      const LossBreakdown loss = total_loss(OrbitState::from_vector(epoch, map.to_state(x)), obs, stage);
      if (!previous.empty()) {
        for (std::size_t m = 0; m < num_images; ++m) diffs[m].push_back(std::abs(loss.per_image[m] - previous[m]));
      }
      previous = loss.per_image;
      if (loss.total < best) {
        best = loss.total;
        best_x = x;
      }

      LossRecord record{k, iteration, loss.per_image, loss.total, map.to_state(x)};
      if (progress) progress(record);
      result.trace.push_back(std::move(record));

      const GradientResult grad = central_gradient(objective, x, cfg.h, Vec6::Ones(), cfg.threads);
      result.gradient_warning = result.gradient_warning || grad.warning;
      const AdamStep update = adam_step(grad.gradient, adam, step, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
      adam = update.state;
      // Halve steps that leave the bound region or dive below the surface;
      // the loss is undefined there and the gradient carries no signal back.
      Vec6 delta = update.update;
      for (int tries = 0; tries < cfg.max_step_halvings && !admissible(map.to_state(x + delta)); ++tries) {
        delta *= 0.5;
      }
      if (admissible(map.to_state(x + delta))) {
        x += delta;
      } else {
        adam = AdamState{};
      }
      ++iteration;
    }
    // ADAM does not descend monotonically; leave the stage from its best point.
    const double last = objective(x);
    if (!(last <= best)) x = best_x;
    result.stage_final_losses.push_back(std::min(best, last));
    step *= cfg.cooldown;
  }

  result.final_state = OrbitState::from_vector(epoch, map.to_state(x));
  result.final_loss = total_loss(result.final_state, obs, stage);
  result.iterations = iteration;
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace streakfit
