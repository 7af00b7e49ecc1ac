#include "streakfit/sim_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Geometry>

#include "streakfit/camera.hpp"
#include "streakfit/errors.hpp"
#include "streakfit/observer.hpp"
#include "streakfit/parallel.hpp"

namespace streakfit {

char to_char(OrbitType t) { return static_cast<char>('A' + static_cast<int>(t)); }

OrbitType orbit_type_from_char(char c) {
  switch (c) {
    case 'A': case 'a': return OrbitType::A;
    case 'B': case 'b': return OrbitType::B;
    case 'C': case 'c': return OrbitType::C;
    case 'D': case 'd': return OrbitType::D;
    default: throw InvalidArgument(std::string("unknown orbit type '") + c + "'");
  }
}

const std::vector<OrbitType>& all_orbit_types() {
  static const std::vector<OrbitType> types{OrbitType::A, OrbitType::B, OrbitType::C, OrbitType::D};
  return types;
}

KeplerianElements sample_orbit(OrbitType type, std::mt19937_64& rng) {
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  KeplerianElements el;
  switch (type) {
    case OrbitType::A:
      el.periapsis_radius = uniform(6880.0, 8380.0);
      el.eccentricity = uniform(0.0, 0.01);
      break;
    case OrbitType::B:
      el.periapsis_radius = uniform(8380.0, 9380.0);
      el.eccentricity = uniform(0.01, 0.2);
      break;
    case OrbitType::C:
      el.periapsis_radius = uniform(8380.0, 9380.0);
      el.eccentricity = uniform(0.2, 0.4);
      break;
    case OrbitType::D:
      el.periapsis_radius = uniform(8380.0, 9380.0);
      el.eccentricity = uniform(0.4, 0.6);
      break;
  }
  el.inclination = uniform(0.0, 180.0);
  el.raan = uniform(0.0, 360.0);
  el.arg_periapsis = uniform(0.0, 360.0);
  el.true_anomaly = uniform(0.0, 360.0);
  return el;
}

IntervalSpec IntervalSpec::for_gap13(double gap13) {
  if (!(gap13 > 2.0)) throw InvalidArgument("gap13 must exceed 2 s");
  IntervalSpec s;
  s.gap13 = gap13;
  s.gap12_mean = 0.5 * gap13;
  // 10 s at 60 s, 15 s at 120 s, 20 s at 240 s; log-linear in between.
  const double l = std::log2(gap13 / 60.0);
  s.gap12_sd = l <= 1.0 ? 10.0 + 5.0 * l : 15.0 + 5.0 * (l - 1.0);
  s.gap12_sd = std::max(s.gap12_sd, 1.0);
  return s;
}

namespace {

Pointing pointing_from_horizon(const Vec3& site_eci_pos, double az_deg, double el_deg, double roll_deg) {
  const Vec3 up = site_eci_pos.normalized();
  Vec3 east = Vec3::UnitZ().cross(up);
  if (east.norm() < 1e-12) east = Vec3::UnitY();
  east.normalize();
  const Vec3 north = up.cross(east);
  const double az = az_deg * kDegToRad;
  const double el = el_deg * kDegToRad;
  const Vec3 b = std::cos(el) * (std::sin(az) * east + std::cos(az) * north) + std::sin(el) * up;
  const double ra = std::atan2(b.y(), b.x()) * kRadToDeg;
  const double dec = std::asin(std::clamp(b.z(), -1.0, 1.0)) * kRadToDeg;
  return Pointing::from_radec(ra, dec, roll_deg);
}

struct ImageGeometry {
  ObserverSite site;
  Pointing pointing;
  ExposureWindow window;
  CropBounds crop;
  Corner start_corner = Corner::TopLeft;
};

// Samples positions along the exposure to bound the streak on the sensor.
bool projected_path(const OrbitState& truth, const CameraFrame& frame0, const ObserverSite& site,
                    const ExposureWindow& w, int samples, std::vector<Vec2>& out) {
  out.clear();
  for (int n = 0; n <= samples; ++n) {
    const double t = w.start + w.duration * n / samples;
    const CameraFrame f(t, site_eci(site, t), frame0.boresight(), frame0.up_reference(), frame0.intrinsics());
    Vec2 u;
    if (!try_world_to_pixel(propagate_position(truth, t - truth.epoch), f, u)) return false;
    out.push_back(u);
  }
  return true;
}

double path_length(const std::vector<Vec2>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

ImageGeometry sample_geometry(const OrbitState& truth, double start, const ScenarioOptions& opt,
                              std::mt19937_64& rng) {
  ExposureWindow w{start, opt.exposure, 1};
  const double t_end = start + opt.exposure;
  const Vec3 p0 = propagate_position(truth, start - truth.epoch);
  const Vec3 p1 = propagate_position(truth, t_end - truth.epoch);
  const double min_el = opt.min_object_elevation_deg * kDegToRad;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double pad = kPsfCutoffSigmas * opt.psf_sigma;
  constexpr int kCoarse = 32;
  std::vector<Vec2> path;

  for (int s = 0; s < opt.max_site_attempts; ++s) {
    const ObserverSite site = random_site(rng);
    if (elevation_angle(site, start, p0) < min_el || elevation_angle(site, t_end, p1) < min_el) continue;

    // Streak length barely depends on pointing; check the crop budget with a
    // camera aimed at the object before searching for a pointing.
    const Vec3 obs0 = site_eci(site, start);
    const Vec3 aim = (p0 - obs0).normalized();
    const Vec3 ref = std::abs(aim.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const CameraFrame aimed(start, obs0, aim, ref, opt.intrinsics);
    if (!projected_path(truth, aimed, site, w, kCoarse, path)) continue;
    {
      Eigen::AlignedBox2d box;
      for (const Vec2& u : path) box.extend(u);
      const Vec2 size = box.sizes() + Vec2::Constant(2.0 * opt.margin_max);
      if (size.norm() > opt.max_crop_diagonal) continue;
    }

    for (int k = 0; k < opt.max_pointing_attempts; ++k) {
      const double el = opt.min_pointing_elevation_deg +
                        (opt.max_pointing_elevation_deg - opt.min_pointing_elevation_deg) * unit(rng);
      const double az = 360.0 * unit(rng);
      const double roll = 360.0 * unit(rng);
      const Pointing pointing = pointing_from_horizon(obs0, az, el, roll);
      const CameraFrame f0(start, obs0, pointing.boresight, pointing.up_reference, opt.intrinsics);
      Vec2 u0;
      Vec2 u1;
      if (!try_world_to_pixel(p0, f0, u0) || !opt.intrinsics.contains(u0)) continue;
      const CameraFrame f1(t_end, site_eci(site, t_end), pointing.boresight, pointing.up_reference,
                           opt.intrinsics);
      if (!try_world_to_pixel(p1, f1, u1) || !opt.intrinsics.contains(u1)) continue;
      if (!projected_path(truth, f0, site, w, kCoarse, path)) continue;

      Eigen::AlignedBox2d box;
      for (const Vec2& u : path) box.extend(u);
      const double m_left = opt.margin_min + (opt.margin_max - opt.margin_min) * unit(rng);
      const double m_right = opt.margin_min + (opt.margin_max - opt.margin_min) * unit(rng);
      const double m_top = opt.margin_min + (opt.margin_max - opt.margin_min) * unit(rng);
      const double m_bottom = opt.margin_min + (opt.margin_max - opt.margin_min) * unit(rng);
      const int x0 = static_cast<int>(std::floor(box.min().x() - std::max(m_left, pad)));
      const int y0 = static_cast<int>(std::floor(box.min().y() - std::max(m_top, pad)));
      const int x1 = static_cast<int>(std::ceil(box.max().x() + std::max(m_right, pad)));
      const int y1 = static_cast<int>(std::ceil(box.max().y() + std::max(m_bottom, pad)));
      if (x0 < 0 || y0 < 0 || x1 >= opt.intrinsics.width || y1 >= opt.intrinsics.height) continue;

      ImageGeometry g;
      g.site = site;
      g.pointing = pointing;
      g.crop = CropBounds{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
      const double length = path_length(path);
      g.window = ExposureWindow{start, opt.exposure, std::max(64, static_cast<int>(std::ceil(length)))};
      double best = std::numeric_limits<double>::infinity();
      for (Corner c : {Corner::TopLeft, Corner::TopRight, Corner::BottomLeft, Corner::BottomRight}) {
        const double d = (corner_pixel(g.crop, c) - path.front()).norm();
        if (d < best) {
          best = d;
          g.start_corner = c;
        }
      }
      return g;
    }
  }
  throw GeometryError("no observable site and pointing found");
}

}  // namespace

Scenario make_scenario(const KeplerianElements& el, OrbitType type, const IntervalSpec& interval,
                       double noise_sigma, std::mt19937_64& rng, const ScenarioOptions& options) {
  if (options.images < 1) throw InvalidArgument("a scenario needs at least one image");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
  Scenario sc;
  sc.type = type;
  sc.truth_elements = el;
  sc.interval = interval;
  sc.noise_sigma = noise_sigma;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double t1 = 7.0e8 + 3.15e7 * unit(rng);
  std::vector<double> starts{t1};
  if (options.images >= 2) {
    std::normal_distribution<double> g12(interval.gap12_mean, interval.gap12_sd);
    const double gap12 = std::clamp(g12(rng), 1.0, interval.gap13 - 1.0);
    if (options.images == 2) {
      starts.push_back(t1 + interval.gap13);
    } else {
      starts.push_back(t1 + gap12);
      for (int m = 2; m < options.images; ++m) {
        // Further images spread evenly between image 2 and the last one.
        const double frac = static_cast<double>(m - 1) / (options.images - 2);
        starts.push_back(t1 + gap12 + frac * (interval.gap13 - gap12));
      }
    }
  }
  const double t_initial = 0.5 * (starts.front() + starts.back());
  sc.truth_state = elements_to_state(el, t_initial);

  std::vector<ImageGeometry> geometry;
  for (double start : starts) geometry.push_back(sample_geometry(sc.truth_state, start, options, rng));

  std::vector<StreakImage> images;
  for (const ImageGeometry& g : geometry) {
    const std::vector<CameraFrame> frames = frames_for_window(g.site, g.pointing, g.window, options.intrinsics);
    StreakImage img = render_streak(sc.truth_state, frames, g.window, options.psf_sigma, g.crop);
    img.site = g.site;
    img.pointing = g.pointing;
    img.intrinsics = options.intrinsics;
    img.start_corner = g.start_corner;
    normalize_peak(img.pixels);
    std::vector<Hole> holes;
    img = inject_holes(img, rng, options.holes, options.hole_min_diameter, options.hole_max_diameter, &holes);
    sc.holes.push_back(std::move(holes));
    images.push_back(std::move(img));
  }
  // Noise last so scenarios differing only in noise level share geometry and
  // holes. Holes stay exact zeros, as removed sources are in real frames.
  for (std::size_t m = 0; m < images.size(); ++m) {
    images[m] = add_gaussian_noise(images[m], noise_sigma, rng);
    cut_holes(images[m].pixels, sc.holes[m]);
    images[m].noise_sigma = noise_sigma;
  }
  sc.observations = make_observation_set(std::move(images));
  return sc;
}

double endpoint_error(const OrbitState& fit, const OrbitState& truth, const ObservationSet& obs) {
  const std::vector<Vec2> a = streak_endpoints(fit, obs);
  const std::vector<Vec2> b = streak_endpoints(truth, obs);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return sum / static_cast<double>(a.size());
}

double angle_difference(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

MetricsRow orbital_errors(const OrbitState& fit, const KeplerianElements& truth) {
  const KeplerianElements el = state_to_elements(fit);
  MetricsRow r;
  r.drp = std::abs(el.periapsis_radius - truth.periapsis_radius);
  r.de = std::abs(el.eccentricity - truth.eccentricity);
  r.di = angle_difference(el.inclination, truth.inclination);
  r.draan = angle_difference(el.raan, truth.raan);
  if (truth.eccentricity >= kCircularTruthEccentricity) {
    r.dargp = angle_difference(el.arg_periapsis, truth.arg_periapsis);
    r.dtrue = angle_difference(el.true_anomaly, truth.true_anomaly);
  }
  return r;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"du_px", "drp_km", "de", "di_deg", "draan_deg", "dargp_deg", "dtrue_deg"};
  return names;
}

std::optional<double> metric_value(const MetricsRow& row, const std::string& name) {
  if (name == "du_px") return row.du;
  if (name == "drp_km") return row.drp;
  if (name == "de") return row.de;
  if (name == "di_deg") return row.di;
  if (name == "draan_deg") return row.draan;
  if (name == "dargp_deg") return row.dargp;
  if (name == "dtrue_deg") return row.dtrue;
  throw InvalidArgument("unknown metric " + name);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Quartiles quartiles(std::vector<double> values) {
  return Quartiles{percentile(values, 0.25), percentile(values, 0.5), percentile(values, 0.75)};
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "init") return ExperimentKind::Init;
  if (s == "interval") return ExperimentKind::Interval;
  if (s == "snr") return ExperimentKind::Snr;
  throw InvalidArgument("unknown experiment kind '" + s + "'");
}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Init: return "init";
    case ExperimentKind::Interval: return "interval";
    case ExperimentKind::Snr: return "snr";
  }
  return "?";
}

std::string to_string(FitMode m) { return m == FitMode::Refine ? "refine" : "end-to-end"; }

std::string level_name(InitLevel level) {
  static const char* names[] = {"I", "II", "III", "IV", "V"};
  return names[static_cast<int>(level) - 1];
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct CellSpec {
  std::string name;
  std::optional<InitLevel> level;  // set for the init sweep
  FitMode mode = FitMode::Refine;
};

struct Job {
  OrbitType type = OrbitType::A;
  int trial = 0;
  double gap13 = 60.0;
  double snr = 4.0;
  std::vector<CellSpec> cells;
  std::vector<std::size_t> slots;  // index into the record array per cell
};

std::vector<TrialRecord> run_job(const ExperimentConfig& cfg, const Job& job) {
  const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(job.trial);
  const auto type_id = static_cast<std::uint32_t>(job.type);
  std::vector<TrialRecord> out(job.cells.size());
  for (std::size_t c = 0; c < job.cells.size(); ++c) {
    out[c].cell = job.cells[c].name;
    out[c].trial = job.trial;
    out[c].seed = trial_seed;
  }

  Scenario sc;
  try {
    sc = simulate_trial(job.type, job.gap13, job.snr, trial_seed, cfg.scenario);
  } catch (const std::exception& e) {
    for (TrialRecord& r : out) {
      r.failed = true;
      r.error = std::string("scenario: ") + e.what();
    }
    return out;
  }

  const ObservationSet& obs = sc.observations;
  for (std::size_t c = 0; c < job.cells.size(); ++c) {
    const CellSpec& cell = job.cells[c];
    TrialRecord& rec = out[c];
    const auto start = std::chrono::steady_clock::now();
    try {
      OrbitState init;
      if (cell.mode == FitMode::EndToEnd) {
        init = corner_init(obs);
      } else {
        const InitLevel level = cell.level.value_or(cfg.refine_level);
        std::mt19937_64 init_rng = make_stream(trial_seed, 3, type_id, static_cast<std::uint32_t>(level));
        init = degraded_init(sc.truth_state, obs, level, init_rng);
      }
      rec.init = orbital_errors(init, sc.truth_elements);
      rec.init.du = endpoint_error(init, sc.truth_state, obs);
      if (!cfg.init_only) {
        FitConfig fc = cfg.fit_override ? *cfg.fit_override : FitConfig::recommended(max_interval(obs));
        fc.threads = cfg.threads > 1 ? 1 : fc.threads;
        const FitResult fr = fit(obs, init, fc);
        rec.final_loss = fr.final_loss.total;
        rec.iterations = fr.iterations;
        MetricsRow conv = orbital_errors(fr.final_state, sc.truth_elements);
        conv.du = endpoint_error(fr.final_state, sc.truth_state, obs);
        rec.converged = conv;
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

}  // namespace

std::string cell_name(ExperimentKind kind, OrbitType type, const std::string& variable,
                      std::optional<FitMode> mode) {
  std::string s = to_string(kind) + " ";
  switch (kind) {
    case ExperimentKind::Init: s += "level=" + variable; break;
    case ExperimentKind::Interval: s += "gap13=" + variable; break;
    case ExperimentKind::Snr: s += "snr=" + variable; break;
  }
  s += std::string(" type=") + to_char(type);
  if (mode) s += " mode=" + to_string(*mode);
  return s;
}

Scenario simulate_trial(OrbitType type, double gap13, double snr, std::uint64_t trial_seed,
                        const ScenarioOptions& options) {
  const auto type_id = static_cast<std::uint32_t>(type);
  // The orbit and geometry streams ignore SNR so noise levels are paired;
  // the geometry stream depends on the interval because visibility does.
  std::mt19937_64 orbit_rng = make_stream(trial_seed, 1, type_id);
  const KeplerianElements el = sample_orbit(type, orbit_rng);
  std::mt19937_64 scene_rng = make_stream(trial_seed, 2, type_id, static_cast<std::uint32_t>(std::lround(gap13)));
  Scenario sc = make_scenario(el, type, IntervalSpec::for_gap13(gap13), noise_sigma_for_snr(snr), scene_rng, options);
  sc.seed = trial_seed;
  return sc;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    purpose, a, b};
  return std::mt19937_64(seq);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw InvalidArgument("trial count must be at least 1");
  if (cfg.types.empty()) throw InvalidArgument("no orbit types selected");

  ExperimentResult result;
  std::vector<Job> jobs;
  std::vector<std::string> cells;
  std::vector<std::vector<std::size_t>> cell_slots;  // per cell, per trial

  auto add_cell = [&](const std::string& name) {
    cells.push_back(name);
    cell_slots.emplace_back(static_cast<std::size_t>(cfg.trials));
    return cells.size() - 1;
  };

  // Cells are laid out variable-major; one job per (variable, type, trial)
  // covers every level or mode sharing that scenario.
  std::vector<std::pair<double, std::string>> variables;
  if (cfg.kind == ExperimentKind::Init) {
    variables.emplace_back(cfg.init_gap13, "");
  } else if (cfg.kind == ExperimentKind::Interval) {
    for (double g : cfg.gaps) variables.emplace_back(g, format_number(g));
  } else {
    for (double s : cfg.snrs) variables.emplace_back(s, format_number(s));
  }

  for (const auto& [value, label] : variables) {
    for (OrbitType type : cfg.types) {
      std::vector<CellSpec> specs;
      std::vector<std::size_t> ids;
      if (cfg.kind == ExperimentKind::Init) {
        for (InitLevel level : cfg.levels) {
          specs.push_back(CellSpec{cell_name(cfg.kind, type, level_name(level), std::nullopt), level, FitMode::Refine});
        }
      } else {
        for (FitMode mode : cfg.modes) specs.push_back(CellSpec{cell_name(cfg.kind, type, label, mode), std::nullopt, mode});
      }
      for (const CellSpec& s : specs) ids.push_back(add_cell(s.name));
      for (int t = 0; t < cfg.trials; ++t) {
        Job job;
        job.type = type;
        job.trial = t;
        job.gap13 = cfg.kind == ExperimentKind::Interval ? value
                    : cfg.kind == ExperimentKind::Snr        ? cfg.snr_gap13
                                                             : cfg.init_gap13;
        job.snr = cfg.kind == ExperimentKind::Snr ? value : cfg.fixed_snr;
        job.cells = specs;
        for (std::size_t id : ids) job.slots.push_back(id);
        jobs.push_back(std::move(job));
      }
    }
  }

  std::vector<std::vector<TrialRecord>> job_records(jobs.size());
  parallel_for(jobs.size(), std::max(cfg.threads, 1),
               [&](std::size_t j) { job_records[j] = run_job(cfg, jobs[j]); });

  // Records ordered by cell, then trial.
  std::vector<std::vector<TrialRecord>> by_cell(cells.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t c = 0; c < jobs[j].slots.size(); ++c) by_cell[jobs[j].slots[c]].push_back(job_records[j][c]);
  }
  for (auto& v : by_cell) {
    std::sort(v.begin(), v.end(), [](const TrialRecord& a, const TrialRecord& b) { return a.trial < b.trial; });
    for (TrialRecord& r : v) result.trials.push_back(std::move(r));
  }
  result.cells = cells;
  result.table = summarize(cells, result.trials);
  return result;
}

std::vector<QuartileRow> summarize(const std::vector<std::string>& cells, const std::vector<TrialRecord>& trials) {
  std::vector<QuartileRow> rows;
  for (const std::string& cell : cells) {
    int n = 0;
    int failures = 0;
    for (const TrialRecord& r : trials) {
      if (r.cell != cell) continue;
      ++n;
      if (r.failed) ++failures;
    }
    for (const char* phase : {"init", "converged"}) {
      const bool conv = std::string(phase) == "converged";
      for (const std::string& metric : metric_names()) {
        std::vector<double> values;
        bool any_phase = false;
        for (const TrialRecord& r : trials) {
          if (r.cell != cell || r.failed) continue;
          const MetricsRow* row = conv ? (r.converged ? &*r.converged : nullptr) : &r.init;
          if (!row) continue;
          any_phase = true;
          if (const std::optional<double> v = metric_value(*row, metric)) values.push_back(*v);
        }
        if (conv && !any_phase && failures < n) continue;  // init-only sweep
        rows.push_back(QuartileRow{cell, phase, metric, quartiles(values), n, failures});
      }
    }
  }
  return rows;
}

std::string quartile_csv(const std::vector<QuartileRow>& rows) {
  std::ostringstream os;
  os << "cell,phase,metric,Q1,Q2,Q3,n_trials,n_failures\n";
  for (const QuartileRow& r : rows) {
    os << r.cell << ',' << r.phase << ',' << r.metric << ',' << format_number(r.q.q1) << ','
       << format_number(r.q.q2) << ',' << format_number(r.q.q3) << ',' << r.n_trials << ',' << r.n_failures
       << '\n';
  }
  return os.str();
}

std::string trial_csv(const std::vector<TrialRecord>& trials) {
  std::ostringstream os;
  os << "cell,trial,seed,failed,phase";
  for (const std::string& m : metric_names()) os << ',' << m;
  os << ",final_loss,iterations,error\n";
  for (const TrialRecord& r : trials) {
    auto emit = [&](const char* phase, const MetricsRow* row) {
      os << r.cell << ',' << r.trial << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ',' << phase;
      for (const std::string& m : metric_names()) {
        os << ',';
        if (row && !r.failed) {
          if (const std::optional<double> v = metric_value(*row, m)) os << format_number(*v);
        }
      }
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      os << ',' << format_number(r.final_loss) << ',' << r.iterations << ',' << err << '\n';
    };
    emit("init", &r.init);
    if (r.converged) emit("converged", &*r.converged);
  }
  return os.str();
}

}  // namespace streakfit
