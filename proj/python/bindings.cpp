#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "streakfit/errors.hpp"
#include "streakfit/init_iod.hpp"
#include "streakfit/optimizer.hpp"
#include "streakfit/orbit.hpp"
#include "streakfit/preprocess.hpp"
#include "streakfit/sim_harness.hpp"
#include "streakfit/streak_io.hpp"

namespace py = pybind11;
using namespace streakfit;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array2 to_numpy(const Grid& g) {
  Array2 out({g.height(), g.width()});
  std::copy(g.data(), g.data() + g.size(), out.mutable_data());
  return out;
}

Grid from_numpy(const Array2& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Grid g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.data());
  return g;
}

BlurBorder border_from(const std::string& s) {
  if (s == "zero") return BlurBorder::Zero;
  if (s == "normalized") return BlurBorder::Normalized;
  throw py::value_error("border must be 'zero' or 'normalized'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Orbit fitting directly on long-exposure streak images";

  py::register_exception<Error>(m, "StreakfitError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.attr("MU_EARTH") = kMuEarth;
  m.attr("EARTH_RADIUS") = kEarthRadius;

  py::class_<KeplerianElements>(m, "KeplerianElements")
      .def(py::init<>())
      .def(py::init([](double rp, double e, double i, double raan, double argp, double f) {
             KeplerianElements el;
             el.periapsis_radius = rp;
             el.eccentricity = e;
             el.inclination = i;
             el.raan = raan;
             el.arg_periapsis = argp;
             el.true_anomaly = f;
             return el;
           }),
           py::arg("periapsis_radius"), py::arg("eccentricity"), py::arg("inclination"), py::arg("raan"),
           py::arg("arg_periapsis"), py::arg("true_anomaly"))
      .def_readwrite("periapsis_radius", &KeplerianElements::periapsis_radius)
      .def_readwrite("eccentricity", &KeplerianElements::eccentricity)
      .def_readwrite("inclination", &KeplerianElements::inclination)
      .def_readwrite("raan", &KeplerianElements::raan)
      .def_readwrite("arg_periapsis", &KeplerianElements::arg_periapsis)
      .def_readwrite("true_anomaly", &KeplerianElements::true_anomaly);

  py::class_<OrbitState>(m, "OrbitState")
      .def(py::init<>())
      .def(py::init([](double epoch, const Vec3& p, const Vec3& v) { return OrbitState{epoch, p, v}; }),
           py::arg("epoch"), py::arg("position"), py::arg("velocity"))
      .def_readwrite("epoch", &OrbitState::epoch)
      .def_readwrite("position", &OrbitState::position)
      .def_readwrite("velocity", &OrbitState::velocity)
      .def("energy", [](const OrbitState& s) { return s.energy(); });

  m.def("elements_to_state", [](const KeplerianElements& el, double epoch) { return elements_to_state(el, epoch); },
        py::arg("elements"), py::arg("epoch") = 0.0);
  m.def("state_to_elements", [](const OrbitState& s) { return state_to_elements(s); });
  m.def("propagate", [](const OrbitState& s, double dt) { return propagate_kepler(s, dt); }, py::arg("state"),
        py::arg("dt"));

  m.def("box_blur", [](const Array2& img, int k, const std::string& border) {
        return to_numpy(box_blur(from_numpy(img), k, border_from(border)));
      },
      py::arg("image"), py::arg("k"), py::arg("border") = "zero");

  py::class_<StreakImage>(m, "StreakImage")
      .def_property_readonly("pixels", [](const StreakImage& s) { return to_numpy(s.pixels); })
      .def_property_readonly("start", [](const StreakImage& s) { return s.window.start; })
      .def_property_readonly("duration", [](const StreakImage& s) { return s.window.duration; })
      .def_property_readonly("steps", [](const StreakImage& s) { return s.window.steps; })
      .def_property_readonly("crop", [](const StreakImage& s) {
        return py::make_tuple(s.crop.x0, s.crop.y0, s.crop.width, s.crop.height);
      })
      .def_readonly("psf_sigma", &StreakImage::psf_sigma)
      .def_readonly("noise_sigma", &StreakImage::noise_sigma);

  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init(&make_observation_set), py::arg("images"))
      .def_readonly("images", &ObservationSet::images)
      .def_readonly("t_initial", &ObservationSet::t_initial);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("truth_elements", &Scenario::truth_elements)
      .def_readonly("truth_state", &Scenario::truth_state)
      .def_readonly("observations", &Scenario::observations)
      .def_readonly("noise_sigma", &Scenario::noise_sigma)
      .def_readonly("seed", &Scenario::seed);

  m.def("simulate", [](const std::string& type, double gap13, double snr, std::uint64_t seed) {
        if (type.size() != 1) throw py::value_error("orbit type must be one of A, B, C, D");
        return simulate_trial(orbit_type_from_char(type[0]), gap13, snr, seed);
      },
      py::arg("orbit_type"), py::arg("gap13") = 60.0, py::arg("snr") = 4.0, py::arg("seed") = 0);

  m.def("read_observation", [](const std::filesystem::path& p) { return read_observation(p).image; });
  m.def("write_observation", [](const std::filesystem::path& stem, const StreakImage& img) {
    write_observation(stem, img);
  });

  m.def("corner_init", [](const ObservationSet& obs) { return corner_init(obs); });
  m.def("degraded_init", [](const OrbitState& truth, const ObservationSet& obs, int level, std::uint64_t seed) {
        if (level < 1 || level > 5) throw py::value_error("level must be 1..5");
        std::mt19937_64 rng = make_stream(seed, 3, 0, static_cast<std::uint32_t>(level));
        return degraded_init(truth, obs, static_cast<InitLevel>(level), rng);
      },
      py::arg("truth"), py::arg("observations"), py::arg("level"), py::arg("seed") = 0);
  m.def("endpoint_error", &endpoint_error, py::arg("fit"), py::arg("truth"), py::arg("observations"));

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_static("recommended", [](double dt) { return FitConfig::recommended(dt); }, py::arg("dt_max"))
      .def_static("for_max_interval", &FitConfig::for_max_interval, py::arg("dt_max"))
      .def("update", [](FitConfig& c, const std::map<std::string, std::string>& values) { apply_fit_config(c, values); })
      .def("validate", &FitConfig::validate)
      .def_readwrite("h", &FitConfig::h)
      .def_readwrite("step_size", &FitConfig::step_size)
      .def_readwrite("cooldown", &FitConfig::cooldown)
      .def_readwrite("k_max", &FitConfig::k_max)
      .def_readwrite("k_min", &FitConfig::k_min)
      .def_readwrite("eta", &FitConfig::eta)
      .def_readwrite("gamma", &FitConfig::gamma)
      .def_readwrite("ma_window", &FitConfig::ma_window)
      .def_readwrite("max_iters_per_stage", &FitConfig::max_iters_per_stage)
      .def_readwrite("endpoint_unit_px", &FitConfig::endpoint_unit_px)
      .def_readwrite("threads", &FitConfig::threads);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("initial_state", &FitResult::initial_state)
      .def_readonly("final_state", &FitResult::final_state)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("stage_boundaries", &FitResult::stage_boundaries)
      .def_readonly("stage_kernels", &FitResult::stage_kernels)
      .def_readonly("stage_final_losses", &FitResult::stage_final_losses)
      .def_readonly("runtime_seconds", &FitResult::runtime_seconds)
      .def_property_readonly("final_loss", [](const FitResult& r) { return r.final_loss.total; })
      .def_property_readonly("final_image_losses", [](const FitResult& r) { return r.final_loss.per_image; })
      .def_property_readonly("trace", [](const FitResult& r) {
        py::list out;
        for (const LossRecord& rec : r.trace) out.append(py::make_tuple(rec.iteration, rec.kernel_size, rec.total));
        return out;
      });

  m.def("fit", [](const ObservationSet& obs, const OrbitState& init, std::optional<FitConfig> cfg) {
        const FitConfig c = cfg ? *cfg : FitConfig::recommended(max_interval(obs));
        py::gil_scoped_release release;
        return fit(obs, init, c);
      },
      py::arg("observations"), py::arg("init"), py::arg("config") = py::none());

  m.def("run_experiment", [](const std::string& kind, int trials, std::uint64_t seed, const std::string& types,
                             bool init_only, int threads) {
        ExperimentConfig cfg;
        cfg.kind = experiment_kind_from_string(kind);
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.init_only = init_only;
        cfg.threads = threads;
        cfg.types.clear();
        for (char c : types) cfg.types.push_back(orbit_type_from_char(c));
        py::gil_scoped_release release;
        return quartile_csv(run_experiment(cfg).table);
      },
      py::arg("kind"), py::arg("trials"), py::arg("seed") = 0, py::arg("types") = "ABCD",
      py::arg("init_only") = false, py::arg("threads") = 1);
}
