#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "streakfit/errors.hpp"
#include "streakfit/init_iod.hpp"
#include "streakfit/optimizer.hpp"
#include "streakfit/parallel.hpp"
#include "streakfit/plot.hpp"
#include "streakfit/sim_harness.hpp"
#include "streakfit/streak_io.hpp"

namespace fs = std::filesystem;
using namespace streakfit;

namespace {

struct SimulateArgs {
  std::string orbit_type;
  double gap13 = 60.0;
  double snr = 4.0;
  std::uint64_t seed = 0;
  std::string out_dir;
  int images = 3;
};

struct FitArgs {
  std::vector<std::string> obs;
  std::string init;
  std::string mode = "refine";
  std::string out = "result.json";
  std::string config;
  std::vector<std::string> overrides;
  bool plots = true;
  int threads = 0;
};

struct ExperimentArgs {
  std::string kind = "init";
  int trials = 20;
  std::uint64_t seed = 0;
  std::string out = "experiment.csv";
  std::string types = "ABCD";
  std::string trial_csv;
  std::string plot_dir;
  std::string config;
  bool init_only = false;
  int threads = 0;
};

fs::path with_suffix(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

int run_simulate(const SimulateArgs& a) {
  if (a.orbit_type.size() != 1) throw InvalidArgument("orbit type must be one of A, B, C, D");
  const OrbitType type = orbit_type_from_char(a.orbit_type[0]);
  ScenarioOptions opts;
  opts.images = a.images;
  const Scenario sc = simulate_trial(type, a.gap13, a.snr, a.seed, opts);
  const ObservationSet& obs = sc.observations;

  fs::create_directories(a.out_dir);
  const TruthRecord truth{sc.truth_elements, obs.t_initial};
  for (std::size_t m = 0; m < obs.images.size(); ++m) {
    write_observation(fs::path(a.out_dir) / ("obs_" + std::to_string(m + 1)), obs.images[m], truth);
  }
  Json t{{"orbit_type", std::string(1, to_char(type))},
         {"seed", a.seed},
         {"gap13_s", a.gap13},
         {"snr", a.snr},
         {"noise_sigma", sc.noise_sigma},
         {"truth_elements", elements_to_json(sc.truth_elements)},
         {"truth_state", state_to_json(sc.truth_state)}};
  write_text_file(fs::path(a.out_dir) / "truth.json", t.dump(2) + "\n");
  std::cout << "wrote " << obs.images.size() << " observations to " << a.out_dir << "\n";
  return 0;
}

std::vector<Vec2> crop_path(const OrbitState& o, const StreakImage& img) {
  std::vector<Vec2> out;
  for (const CameraFrame& f : img.frames) {
    Vec2 u;
    try {
      if (try_world_to_pixel(propagate_position(o, f.epoch() - o.epoch), f, u)) out.push_back(u - img.crop.origin());
    } catch (const Error&) {
      break;
    }
  }
  return out;
}

int run_fit(const FitArgs& a) {
  std::vector<StreakImage> images;
  std::optional<TruthRecord> truth;
  for (const std::string& p : a.obs) {
    LoadedObservation lo = read_observation(p);
    if (!truth && lo.truth) truth = lo.truth;
    images.push_back(std::move(lo.image));
  }
  const ObservationSet obs = make_observation_set(std::move(images));

  if (a.mode != "refine" && a.mode != "end-to-end") throw InvalidArgument("mode must be refine or end-to-end");
  if (a.mode == "refine" && a.init.empty()) throw InvalidArgument("refine mode needs --init");

  FitConfig cfg = FitConfig::recommended(max_interval(obs));
  if (!a.config.empty()) apply_fit_config(cfg, parse_key_values(read_text_file(a.config)));
  std::map<std::string, std::string> cli_values;
  for (const std::string& kv : a.overrides) {
    for (const auto& [k, v] : parse_key_values(kv)) cli_values[k] = v;
  }
  apply_fit_config(cfg, cli_values);
  if (a.threads > 0) cfg.threads = a.threads;
  cfg.validate();

  Json result{{"mode", a.mode}, {"images", a.obs}};
  const fs::path out(a.out);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());

  OrbitState init;
  const std::string source = a.mode == "end-to-end" ? "corner" : a.init;
  result["init_source"] = source;
  try {
    if (source == "corner") {
      init = corner_init(obs);
    } else if (source == "truth") {
      if (!truth) throw IoError("--init truth needs ground truth in the sidecars");
      init = truth->state();
    } else {
      init = state_from_json(Json::parse(read_text_file(source)).at("final_state"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad init file: " + std::string(e.what()));
  } catch (const GeometryError& e) {
    result["status"] = "init_failed";
    result["error"] = e.what();
  } catch (const ConvergenceError& e) {
    result["status"] = "init_failed";
    result["error"] = e.what();
  }
  if (result.contains("status")) {
    write_text_file(out, result.dump(2) + "\n");
    std::cout << "initialisation failed: " << result["error"].get<std::string>() << "\n";
    return 0;
  }

  const FitResult fr = fit(obs, init, cfg);
  result["status"] = "done";
  result.update(fit_result_json(fr));
  if (truth) {
    const OrbitState t = propagate_kepler(truth->state(), obs.t_initial - truth->epoch);
    result["init_endpoint_error_px"] = endpoint_error(fr.initial_state, t, obs);
    result["final_endpoint_error_px"] = endpoint_error(fr.final_state, t, obs);
  }
  write_text_file(out, result.dump(2) + "\n");
  write_text_file(with_suffix(out, "_trace.csv"), loss_trace_csv(fr));

  if (a.plots) {
    for (std::size_t m = 0; m < obs.images.size(); ++m) {
      const StreakImage& img = obs.images[m];
      const std::string tag = "_image" + std::to_string(m + 1);
      write_png(with_suffix(out, tag + "_before.png"),
                overlay_plot(img.pixels, {crop_path(fr.initial_state, img)}, {{230, 40, 40}}));
      write_png(with_suffix(out, tag + "_after.png"),
                overlay_plot(img.pixels, {crop_path(fr.final_state, img)}, {{40, 200, 40}}));
    }
    std::vector<std::vector<double>> series(obs.images.size());
    for (const LossRecord& r : fr.trace) {
      for (std::size_t m = 0; m < r.image_losses.size(); ++m) series[m].push_back(r.image_losses[m]);
    }
    write_png(with_suffix(out, "_loss.png"), line_plot(series, {}, fr.stage_boundaries));
  }

  std::cout << "iterations " << fr.iterations << ", final loss " << fr.final_loss.total;
  if (result.contains("final_endpoint_error_px")) {
    std::cout << ", endpoint error " << result["init_endpoint_error_px"].get<double>() << " -> "
              << result["final_endpoint_error_px"].get<double>() << " px";
  }
  std::cout << "\n";
  return 0;
}

void experiment_plots(const ExperimentResult& r, const fs::path& dir, const std::string& kind) {
  fs::create_directories(dir);
  for (const std::string metric : {"du_px", "drp_km"}) {
    for (const std::string phase : {"init", "converged"}) {
      std::vector<BoxStats> boxes;
      for (const std::string& cell : r.cells) {
        for (const QuartileRow& row : r.table) {
          if (row.cell == cell && row.metric == metric && row.phase == phase) {
            boxes.push_back({row.q.q1, row.q.q2, row.q.q3});
          }
        }
      }
      if (boxes.empty()) continue;
      write_png(dir / (kind + "_" + metric + "_" + phase + ".png"), box_plot(boxes, {}, 1));
    }
  }
}

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentConfig cfg;
  cfg.kind = experiment_kind_from_string(a.kind);
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.init_only = a.init_only;
  cfg.threads = a.threads > 0 ? a.threads : default_worker_count();
  cfg.types.clear();
  for (char c : a.types) cfg.types.push_back(orbit_type_from_char(c));
  if (!a.config.empty()) {
    // The file replaces the interval-based settings; unspecified keys keep
    // the recommended defaults.
    FitConfig fc = FitConfig::recommended(30.0);
    apply_fit_config(fc, parse_key_values(read_text_file(a.config)));
    fc.validate();
    cfg.fit_override = fc;
  }

  const ExperimentResult r = run_experiment(cfg);
  const fs::path out(a.out);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  write_text_file(out, quartile_csv(r.table));
  if (!a.trial_csv.empty()) write_text_file(a.trial_csv, trial_csv(r.trials));
  if (!a.plot_dir.empty()) experiment_plots(r, a.plot_dir, a.kind);
  int failures = 0;
  for (const TrialRecord& t : r.trials) failures += t.failed ? 1 : 0;
  std::cout << r.cells.size() << " cells, " << r.trials.size() << " trial records, " << failures
            << " failures\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orbit fitting directly on long-exposure streak images"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthesise a set of streak observations");
  s->add_option("--orbit-type", sim.orbit_type, "A, B, C or D")->required();
  s->add_option("--gap13", sim.gap13, "Seconds between first and last exposure start");
  s->add_option("--snr", sim.snr, "Streak peak over noise sigma; inf for a noiseless image")
      ->check(CLI::Range(0.0, std::numeric_limits<double>::infinity()) & !CLI::IsMember({0.0}));
  s->add_option("--seed", sim.seed);
  s->add_option("--images", sim.images, "Number of images")->check(CLI::PositiveNumber);
  s->add_option("--out-dir", sim.out_dir)->required();

  FitArgs fa;
  auto* f = app.add_subcommand("fit", "Fit an orbit to observation files");
  f->add_option("--obs", fa.obs, "Observation .strk files")->required()->expected(1, -1);
  f->add_option("--init", fa.init, "truth, corner or a result JSON with final_state");
  f->add_option("--mode", fa.mode, "refine or end-to-end")->check(CLI::IsMember({"refine", "end-to-end"}));
  f->add_option("--out", fa.out, "Result JSON");
  f->add_option("--config", fa.config, "key = value file overriding fit settings")->check(CLI::ExistingFile);
  f->add_option("--set", fa.overrides, "key=value override, applied after --config");
  f->add_option("--threads", fa.threads);
  f->add_flag("!--no-plots", fa.plots, "Skip PNG output");

  ExperimentArgs ea;
  auto* e = app.add_subcommand("experiment", "Run a seeded experiment sweep");
  e->add_option("--kind", ea.kind, "init, interval or snr")->check(CLI::IsMember({"init", "interval", "snr"}));
  e->add_option("--trials", ea.trials)->check(CLI::PositiveNumber);
  e->add_option("--seed", ea.seed);
  e->add_option("--out", ea.out, "Quartile CSV");
  e->add_option("--types", ea.types, "Orbit types, e.g. AB");
  e->add_option("--trial-csv", ea.trial_csv, "Per-trial CSV");
  e->add_option("--plots", ea.plot_dir, "Directory for PNG box charts");
  e->add_option("--config", ea.config, "key = value fit settings for every trial")->check(CLI::ExistingFile);
  e->add_flag("--init-only", ea.init_only, "Report initial estimates without fitting");
  e->add_option("--threads", ea.threads, "Workers (default: cores, capped by STREAKFIT_THREADS)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return run_simulate(sim);
    if (f->parsed()) return run_fit(fa);
    if (e->parsed()) return run_experiment_cmd(ea);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
