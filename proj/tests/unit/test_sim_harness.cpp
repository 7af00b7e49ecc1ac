#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "streakfit/errors.hpp"
#include "streakfit/sim_harness.hpp"

using namespace streakfit;

TEST_CASE("orbit samples respect the class ranges") {
  std::mt19937_64 rng(8);
  for (int n = 0; n < 500; ++n) {
    const OrbitType t = all_orbit_types()[static_cast<std::size_t>(n % 4)];
    const KeplerianElements el = sample_orbit(t, rng);
    const double rp_lo = t == OrbitType::A ? 6880.0 : 8380.0;
    const double rp_hi = t == OrbitType::A ? 8380.0 : 9380.0;
    const double e_lo = t == OrbitType::A ? 0.0 : t == OrbitType::B ? 0.01 : t == OrbitType::C ? 0.2 : 0.4;
    const double e_hi = t == OrbitType::A ? 0.01 : t == OrbitType::B ? 0.2 : t == OrbitType::C ? 0.4 : 0.6;
    CHECK(el.periapsis_radius >= rp_lo);
    CHECK(el.periapsis_radius <= rp_hi);
    CHECK(el.eccentricity >= e_lo);
    CHECK(el.eccentricity <= e_hi);
    CHECK(el.inclination >= 0.0);
    CHECK(el.inclination <= 180.0);
    for (double a : {el.raan, el.arg_periapsis, el.true_anomaly}) {
      CHECK(a >= 0.0);
      CHECK(a < 360.0);
    }
  }
  std::mt19937_64 a(4);
  std::mt19937_64 b(4);
  const KeplerianElements x = sample_orbit(OrbitType::C, a);
  const KeplerianElements y = sample_orbit(OrbitType::C, b);
  CHECK(x.periapsis_radius == y.periapsis_radius);
  CHECK(x.true_anomaly == y.true_anomaly);
}

TEST_CASE("orbit type letters") {
  for (OrbitType t : all_orbit_types()) CHECK(orbit_type_from_char(to_char(t)) == t);
  CHECK_THROWS_AS(orbit_type_from_char('E'), InvalidArgument);
}

TEST_CASE("interval spec") {
  CHECK(IntervalSpec::for_gap13(60.0).gap12_mean == 30.0);
  CHECK(IntervalSpec::for_gap13(60.0).gap12_sd == 10.0);
  CHECK(IntervalSpec::for_gap13(120.0).gap12_sd == 15.0);
  CHECK(IntervalSpec::for_gap13(240.0).gap12_sd == 20.0);
}

TEST_CASE("scenarios") {
  const Scenario sc = simulate_trial(OrbitType::B, 60.0, 4.0, 21);
  const ObservationSet& obs = sc.observations;
  REQUIRE(obs.images.size() == 3);
  CHECK(obs.images[2].window.start - obs.images[0].window.start == doctest::Approx(60.0).epsilon(1e-12));
  const double gap12 = obs.images[1].window.start - obs.images[0].window.start;
  CHECK(gap12 >= 1.0);
  CHECK(gap12 <= 59.0);
  CHECK(obs.t_initial == 0.5 * (obs.images[0].window.start + obs.images[2].window.start));
  CHECK(sc.truth_state.epoch == obs.t_initial);
  CHECK(sc.noise_sigma == 0.25);
  CHECK(sc.seed == 21);
  for (const StreakImage& img : obs.images) {
    CHECK(img.window.duration == 5.0);
    CHECK(img.crop.diagonal() <= 600.0 + 1e-9);
    CHECK(img.start_corner.has_value());
    CHECK(img.pixels.width() == img.crop.width);
    CHECK(img.frames.size() == static_cast<std::size_t>(img.window.steps) + 1);
  }
  REQUIRE(sc.holes.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(sc.holes[m].size() == 4);
    const Grid& g = obs.images[m].pixels;
    for (const Hole& h : sc.holes[m]) {
      for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
          if ((Vec2(x, y) - h.center).norm() <= 0.5 * h.diameter) CHECK(g(x, y) == 0.0);
        }
      }
    }
  }
  // Truth is consistent with the elements it came from.
  const OrbitState from_el = elements_to_state(sc.truth_elements, obs.t_initial);
  CHECK((from_el.position - sc.truth_state.position).norm() < 1e-9);
}

TEST_CASE("scenarios are reproducible and SNR only changes the noise") {
  const Scenario a = simulate_trial(OrbitType::C, 120.0, 4.0, 5);
  const Scenario b = simulate_trial(OrbitType::C, 120.0, 4.0, 5);
  const Scenario c = simulate_trial(OrbitType::C, 120.0, 2.0, 5);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(a.observations.images[m].pixels == b.observations.images[m].pixels);
    CHECK(a.observations.images[m].crop == c.observations.images[m].crop);
    CHECK(a.observations.images[m].window.start == c.observations.images[m].window.start);
  }
  CHECK(a.truth_state.as_vector() == c.truth_state.as_vector());
  CHECK(c.noise_sigma == 0.5);
  CHECK_FALSE(a.observations.images[0].pixels == c.observations.images[0].pixels);
}

TEST_CASE("gap12 is clipped inside the interval") {
  IntervalSpec wide = IntervalSpec::for_gap13(60.0);
  wide.gap12_sd = 1000.0;
  std::mt19937_64 orbit_rng(2);
  const KeplerianElements el = sample_orbit(OrbitType::B, orbit_rng);
  for (int n = 0; n < 10; ++n) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(n));
    const Scenario sc = make_scenario(el, OrbitType::B, wide, 0.25, rng);
    const auto& im = sc.observations.images;
    const double g12 = im[1].window.start - im[0].window.start;
    CHECK(g12 >= 1.0);
    CHECK(g12 <= 59.0);
  }
}

TEST_CASE("endpoint error") {
  const Scenario sc = simulate_trial(OrbitType::A, 60.0, 4.0, 13);
  const ObservationSet& obs = sc.observations;
  CHECK(endpoint_error(sc.truth_state, sc.truth_state, obs) == 0.0);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    OrbitState moved = sc.truth_state;
    moved.position += 2.0 * Vec3(n(rng), n(rng), n(rng));
    moved.velocity += 0.002 * Vec3(n(rng), n(rng), n(rng));
    double sum = 0.0;
    int count = 0;
    for (const StreakImage& img : obs.images) {
      for (const CameraFrame* f : {&img.frames.front(), &img.frames.back()}) {
        const double dt = f->epoch() - sc.truth_state.epoch;
        const Vec2 a = oracle::project(oracle::integrate_two_body(moved, dt), *f);
        const Vec2 b = oracle::project(oracle::integrate_two_body(sc.truth_state, dt), *f);
        sum += (a - b).norm();
        ++count;
      }
    }
    CHECK(count == 6);
    CHECK(endpoint_error(moved, sc.truth_state, obs) == doctest::Approx(sum / count).epsilon(1e-6));
  }
}

TEST_CASE("a uniform 3 px endpoint shift reads as 3 px") {
  // Observer at the geocentre looking straight at each true endpoint. The
  // truth rotated about its own orbit normal is still a Kepler orbit, and
  // every endpoint moves by the rotation angle across the boresight.
  const Scenario sc = simulate_trial(OrbitType::B, 60.0, 4.0, 2);
  ObservationSet obs = sc.observations;
  const Vec3 normal = sc.truth_state.position.cross(sc.truth_state.velocity).normalized();
  for (StreakImage& img : obs.images) {
    for (CameraFrame* f : {&img.frames.front(), &img.frames.back()}) {
      const Vec3 p = propagate_kepler(sc.truth_state, f->epoch() - sc.truth_state.epoch).position;
      *f = CameraFrame(f->epoch(), Vec3::Zero(), p.normalized(), normal, f->intrinsics());
    }
  }
  const double theta = 3.0 * obs.images[0].intrinsics.radians_per_pixel();
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(theta, normal).toRotationMatrix();
  OrbitState fit = sc.truth_state;
  fit.position = rot * fit.position;
  fit.velocity = rot * fit.velocity;
  CHECK(endpoint_error(fit, sc.truth_state, obs) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("angle differences wrap") {
  CHECK(angle_difference(359.0, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(angle_difference(1.0, 359.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(angle_difference(10.0, 190.0) == doctest::Approx(180.0).epsilon(1e-12));
  CHECK(angle_difference(-30.0, 30.0) == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(angle_difference(720.5, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("orbital errors") {
  std::mt19937_64 rng(3);
  const KeplerianElements el = sample_orbit(OrbitType::C, rng);
  const MetricsRow z = orbital_errors(elements_to_state(el), el);
  CHECK(z.drp < 1e-6);
  CHECK(z.de < 1e-9);
  CHECK(z.di < 1e-7);
  CHECK(z.draan < 1e-7);
  REQUIRE(z.dargp.has_value());
  CHECK(*z.dargp < 1e-6);
  REQUIRE(z.dtrue.has_value());
  CHECK(*z.dtrue < 1e-6);

  const KeplerianElements circ = sample_orbit(OrbitType::A, rng);
  const MetricsRow a = orbital_errors(elements_to_state(circ), circ);
  CHECK_FALSE(a.dargp.has_value());
  CHECK_FALSE(a.dtrue.has_value());
  CHECK_FALSE(metric_value(a, "dargp_deg").has_value());
  CHECK(metric_value(a, "du_px").has_value());

  KeplerianElements shifted = el;
  shifted.raan = std::fmod(el.raan + 358.0, 360.0);
  CHECK(orbital_errors(elements_to_state(shifted), el).draan == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("quartiles match a sort-based oracle") {
  const std::vector<double> v{7, 1, 3, 10};
  const Quartiles q = quartiles(v);
  CHECK(q.q1 == 2.5);
  CHECK(q.q2 == 5.0);
  CHECK(q.q3 == 7.75);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 50.0);
  for (std::size_t n : {1u, 2u, 5u, 20u, 101u}) {
    std::vector<double> s(n);
    for (double& x : s) x = u(rng);
    const Quartiles r = quartiles(s);
    CHECK(r.q1 == doctest::Approx(oracle::percentile(s, 0.25)).epsilon(1e-14));
    CHECK(r.q2 == doctest::Approx(oracle::percentile(s, 0.5)).epsilon(1e-14));
    CHECK(r.q3 == doctest::Approx(oracle::percentile(s, 0.75)).epsilon(1e-14));
    if (n == 1) CHECK((r.q1 == s[0] && r.q2 == s[0] && r.q3 == s[0]));
  }
  CHECK(std::isnan(quartiles({}).q2));
}

TEST_CASE("summaries skip failed trials and count them") {
  std::vector<TrialRecord> t(3);
  for (int i = 0; i < 3; ++i) {
    t[static_cast<std::size_t>(i)].cell = "c";
    t[static_cast<std::size_t>(i)].trial = i;
    t[static_cast<std::size_t>(i)].init.du = 10.0 * (i + 1);
    t[static_cast<std::size_t>(i)].converged = MetricsRow{};
    t[static_cast<std::size_t>(i)].converged->du = static_cast<double>(i + 1);
  }
  t[1].failed = true;
  const std::vector<QuartileRow> rows = summarize({"c"}, t);
  bool seen = false;
  for (const QuartileRow& r : rows) {
    CHECK(r.n_trials == 3);
    CHECK(r.n_failures == 1);
    if (r.phase == "converged" && r.metric == "du_px") {
      CHECK(r.q.q2 == 2.0);
      seen = true;
    }
  }
  CHECK(seen);
}

TEST_CASE("experiment sweeps") {
  ExperimentConfig cfg;
  cfg.trials = 1;
  cfg.types = {OrbitType::B};
  cfg.init_only = true;

  SUBCASE("one trial gives degenerate quartiles and identical CSV on rerun") {
    cfg.kind = ExperimentKind::Init;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.cells.size() == 5);
    for (const QuartileRow& q : r.table) {
      if (std::isnan(q.q.q2)) continue;
      CHECK(q.q.q1 == q.q.q2);
      CHECK(q.q.q3 == q.q.q2);
    }
    CHECK(quartile_csv(r.table) == quartile_csv(run_experiment(cfg).table));
    CHECK(quartile_csv(r.table).rfind("cell,phase,metric,Q1,Q2,Q3,n_trials,n_failures\n", 0) == 0);
    cfg.threads = 2;
    CHECK(trial_csv(r.trials) == trial_csv(run_experiment(cfg).trials));
  }
  SUBCASE("the snr sweep holds the interval at 120 s") {
    cfg.kind = ExperimentKind::Snr;
    CHECK(cfg.snr_gap13 == 120.0);
    CHECK(cfg.init_gap13 == 60.0);
    CHECK(cfg.fixed_snr == 4.0);
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.cells.size() == 6);
    CHECK(r.cells.front() == "snr snr=4 type=B mode=refine");
    // The same trial seed at 120 s reproduces the init of the sweep.
    const Scenario sc = simulate_trial(OrbitType::B, 120.0, 4.0, 0);
    CHECK(sc.observations.images[2].window.start - sc.observations.images[0].window.start ==
          doctest::Approx(120.0).epsilon(1e-12));
  }
  SUBCASE("cell names") {
    CHECK(cell_name(ExperimentKind::Init, OrbitType::A, "III", std::nullopt) == "init level=III type=A");
    CHECK(cell_name(ExperimentKind::Interval, OrbitType::D, "240", FitMode::EndToEnd) ==
          "interval gap13=240 type=D mode=end-to-end");
  }
  SUBCASE("bad configs") {
    cfg.trials = 0;
    CHECK_THROWS_AS(run_experiment(cfg), InvalidArgument);
    CHECK_THROWS_AS(experiment_kind_from_string("nope"), InvalidArgument);
  }
}

TEST_CASE("RNG streams are independent of each other and reproducible") {
  std::mt19937_64 a = make_stream(7, 1, 2, 3);
  std::mt19937_64 b = make_stream(7, 1, 2, 3);
  std::mt19937_64 c = make_stream(7, 1, 2, 4);
  std::mt19937_64 d = make_stream(8, 1, 2, 3);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
}
