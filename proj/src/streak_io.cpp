#include "streakfit/streak_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "streakfit/errors.hpp"
#include "streakfit/observer.hpp"

namespace streakfit {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'T', 'R', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j, const char* key) {
  const Json& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw IoError(std::string("field '") + key + "' must hold 3 numbers");
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

const char* corner_name(Corner c) {
  switch (c) {
    case Corner::TopLeft: return "top-left";
    case Corner::TopRight: return "top-right";
    case Corner::BottomLeft: return "bottom-left";
    case Corner::BottomRight: return "bottom-right";
  }
  return "top-left";
}

Corner corner_from(const std::string& s) {
  for (Corner c : {Corner::TopLeft, Corner::TopRight, Corner::BottomLeft, Corner::BottomRight}) {
    if (s == corner_name(c)) return c;
  }
  throw IoError("unknown corner tag '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("config value for '" + key + "' is not a number: " + v);
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("config value for '" + key + "' is not an integer: " + v);
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("config value for '" + key + "' is not a boolean: " + v);
}

}  // namespace

std::vector<std::uint8_t> encode_grid(const Grid& g) {
  std::vector<std::uint8_t> out;
  out.reserve(kStrkHeaderBytes + 4 * g.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(g.width()));
  put_u32(out, static_cast<std::uint32_t>(g.height()));
  put_u32(out, kStrkVersion);
  for (double v : g.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Grid decode_grid(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kStrkHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw IoError("not a STRK grid");
  }
  const std::uint32_t w = get_u32(bytes.data() + 4);
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::uint32_t version = get_u32(bytes.data() + 12);
  if (version != kStrkVersion) throw IoError("unsupported STRK version " + std::to_string(version));
  const std::uint64_t count = static_cast<std::uint64_t>(w) * h;
  if (bytes.size() != kStrkHeaderBytes + 4 * count) {
    throw IoError("STRK payload length does not match the header dimensions");
  }
  Grid g(static_cast<int>(w), static_cast<int>(h));
  auto vals = g.values();
  const std::uint8_t* p = bytes.data() + kStrkHeaderBytes;
  for (std::size_t i = 0; i < vals.size(); ++i, p += 4) {
    vals[i] = std::bit_cast<float>(get_u32(p));
  }
  return g;
}

void write_grid_file(const std::filesystem::path& path, const Grid& g) {
  const auto bytes = encode_grid(g);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Grid read_grid_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_grid(bytes);
}

Json elements_to_json(const KeplerianElements& el) {
  return Json{{"periapsis_radius_km", el.periapsis_radius},
              {"eccentricity", el.eccentricity},
              {"inclination_deg", el.inclination},
              {"raan_deg", el.raan},
              {"arg_periapsis_deg", el.arg_periapsis},
              {"true_anomaly_deg", el.true_anomaly}};
}

KeplerianElements elements_from_json(const Json& j) {
  KeplerianElements el;
  try {
    el.periapsis_radius = j.at("periapsis_radius_km").get<double>();
    el.eccentricity = j.at("eccentricity").get<double>();
    el.inclination = j.at("inclination_deg").get<double>();
    el.raan = j.at("raan_deg").get<double>();
    el.arg_periapsis = j.at("arg_periapsis_deg").get<double>();
    el.true_anomaly = j.at("true_anomaly_deg").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad orbital elements: ") + e.what());
  }
  return el;
}

Json state_to_json(const OrbitState& s) {
  return Json{{"epoch_jd", epoch_to_julian_date(s.epoch)},
              {"position_km", vec_json(s.position)},
              {"velocity_km_s", vec_json(s.velocity)}};
}

OrbitState state_from_json(const Json& j) {
  try {
    OrbitState s;
    s.epoch = julian_date_to_epoch(j.at("epoch_jd").get<double>());
    s.position = vec_from(j, "position_km");
    s.velocity = vec_from(j, "velocity_km_s");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad state: ") + e.what());
  }
}

Json sidecar_json(const StreakImage& img, const std::optional<TruthRecord>& truth) {
  Json j{{"start_jd", epoch_to_julian_date(img.window.start)},
         {"end_jd", epoch_to_julian_date(img.window.end())},
         {"steps", img.window.steps},
         {"site_ecef_km", vec_json(img.site.ecef_position)},
         {"boresight_ra_deg", img.pointing.ra_deg()},
         {"boresight_dec_deg", img.pointing.dec_deg()},
         {"roll_deg", img.pointing.roll_deg()},
         {"pixel_scale_arcsec", img.intrinsics.pixel_scale},
         {"sensor_size_px", Json::array({img.intrinsics.width, img.intrinsics.height})},
         {"principal_point_px",
          Json::array({img.intrinsics.principal_point.x(), img.intrinsics.principal_point.y()})},
         {"crop_origin_px", Json::array({img.crop.x0, img.crop.y0})},
         {"psf_sigma_px", img.psf_sigma},
         {"noise_sigma", img.noise_sigma}};
  if (img.start_corner) j["start_corner"] = corner_name(*img.start_corner);
  if (truth) {
    j["truth_elements"] = elements_to_json(truth->elements);
    j["truth_epoch_jd"] = epoch_to_julian_date(truth->epoch);
  }
  return j;
}

StreakImage image_from_sidecar(const Json& j, Grid pixels) {
  StreakImage img;
  try {
    const double jd0 = j.at("start_jd").get<double>();
    const double jd1 = j.at("end_jd").get<double>();
    if (!(jd1 > jd0)) throw IoError("end_jd must be after start_jd");
    img.window.start = julian_date_to_epoch(jd0);
    img.window.duration = julian_date_to_epoch(jd1) - img.window.start;
    img.window.steps = j.at("steps").get<int>();
    img.site.ecef_position = vec_from(j, "site_ecef_km");
    img.pointing = Pointing::from_radec(j.at("boresight_ra_deg").get<double>(),
                                        j.at("boresight_dec_deg").get<double>(),
                                        j.at("roll_deg").get<double>());
    img.intrinsics.pixel_scale = j.at("pixel_scale_arcsec").get<double>();
    if (j.contains("sensor_size_px")) {
      img.intrinsics.width = j["sensor_size_px"].at(0).get<int>();
      img.intrinsics.height = j["sensor_size_px"].at(1).get<int>();
      img.intrinsics.principal_point =
          Vec2(0.5 * (img.intrinsics.width - 1), 0.5 * (img.intrinsics.height - 1));
    }
    if (j.contains("principal_point_px")) {
      img.intrinsics.principal_point =
          Vec2(j["principal_point_px"].at(0).get<double>(), j["principal_point_px"].at(1).get<double>());
    }
    img.crop.x0 = j.at("crop_origin_px").at(0).get<int>();
    img.crop.y0 = j.at("crop_origin_px").at(1).get<int>();
    img.psf_sigma = j.at("psf_sigma_px").get<double>();
    img.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("start_corner")) img.start_corner = corner_from(j["start_corner"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("incomplete sidecar: ") + e.what());
  }
  if (img.window.steps < 1) throw IoError("steps must be positive");
  img.crop.width = pixels.width();
  img.crop.height = pixels.height();
  img.pixels = std::move(pixels);
  try {
    validate(img.intrinsics);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad camera intrinsics: ") + e.what());
  }
  img.rebuild_frames();
  return img;
}

std::filesystem::path sidecar_path(const std::filesystem::path& grid_path) {
  auto p = grid_path;
  return p.replace_extension(".json");
}

void write_observation(const std::filesystem::path& stem, const StreakImage& img,
                       const std::optional<TruthRecord>& truth) {
  auto grid = stem;
  grid += ".strk";
  write_grid_file(grid, img.pixels);
  write_text_file(sidecar_path(grid), sidecar_json(img, truth).dump(2) + "\n");
}

LoadedObservation read_observation(const std::filesystem::path& path) {
  auto grid = path;
  if (grid.extension() == ".json") grid.replace_extension(".strk");
  Json j;
  try {
    j = Json::parse(read_text_file(sidecar_path(grid)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + sidecar_path(grid).string() + ": " + e.what());
  }
  LoadedObservation out;
  out.image = image_from_sidecar(j, read_grid_file(grid));
  if (j.contains("truth_elements")) {
    try {
      out.truth = TruthRecord{elements_from_json(j["truth_elements"]),
                              julian_date_to_epoch(j.at("truth_epoch_jd").get<double>())};
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("bad truth record: ") + e.what());
    }
  }
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(number) + " has no '='");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(number) + " has an empty key");
    if (!out.emplace(key, value).second) throw InvalidArgument("config key repeated: " + key);
  }
  return out;
}

const std::vector<std::string>& fit_config_keys() {
  static const std::vector<std::string> keys = {
      "h", "step_size", "cooldown", "k_max", "k_min", "eta", "gamma", "ma_window", "beta1", "beta2",
      "adam_epsilon", "max_iters_per_stage", "scaling", "endpoint_unit_px", "min_singular_ratio",
      "auto_kernel", "blur_border", "background_kernel", "reach_kernel", "reach_kernel_cap",
      "max_step_halvings", "threads"};
  return keys;
}

void apply_fit_config(FitConfig& cfg, const std::map<std::string, std::string>& values) {
  for (const auto& [key, v] : values) {
    if (key == "h") cfg.h = to_double(key, v);
    else if (key == "step_size") cfg.step_size = to_double(key, v);
    else if (key == "cooldown") cfg.cooldown = to_double(key, v);
    else if (key == "k_max") cfg.k_max = to_int(key, v);
    else if (key == "k_min") cfg.k_min = to_int(key, v);
    else if (key == "eta") cfg.eta = to_double(key, v);
    else if (key == "gamma") cfg.gamma = to_double(key, v);
    else if (key == "ma_window") cfg.ma_window = to_int(key, v);
    else if (key == "beta1") cfg.beta1 = to_double(key, v);
    else if (key == "beta2") cfg.beta2 = to_double(key, v);
    else if (key == "adam_epsilon") cfg.adam_epsilon = to_double(key, v);
    else if (key == "max_iters_per_stage") cfg.max_iters_per_stage = to_int(key, v);
    else if (key == "endpoint_unit_px") cfg.endpoint_unit_px = to_double(key, v);
    else if (key == "min_singular_ratio") cfg.min_singular_ratio = to_double(key, v);
    else if (key == "auto_kernel") cfg.auto_kernel = to_bool(key, v);
    else if (key == "background_kernel") cfg.background_kernel = to_int(key, v);
    else if (key == "reach_kernel") cfg.reach_kernel = to_bool(key, v);
    else if (key == "reach_kernel_cap") cfg.reach_kernel_cap = to_int(key, v);
    else if (key == "max_step_halvings") cfg.max_step_halvings = to_int(key, v);
    else if (key == "threads") cfg.threads = to_int(key, v);
    else if (key == "scaling") {
      if (v == "endpoint") cfg.scaling = ParamScaling::Endpoint;
      else if (v == "diagonal") cfg.scaling = ParamScaling::Diagonal;
      else throw InvalidArgument("scaling must be endpoint or diagonal");
    } else if (key == "blur_border") {
      if (v == "normalized") cfg.blur_border = BlurBorder::Normalized;
      else if (v == "zero") cfg.blur_border = BlurBorder::Zero;
      else throw InvalidArgument("blur_border must be normalized or zero");
    } else {
      throw InvalidArgument("unknown config key: " + key);
    }
  }
}

Json fit_result_json(const FitResult& r) {
  Json losses = Json::array();
  for (double v : r.final_loss.per_image) losses.push_back(v);
  return Json{{"initial_state", state_to_json(r.initial_state)},
              {"final_state", state_to_json(r.final_state)},
              {"final_image_losses", losses},
              {"final_total_loss", r.final_loss.total},
              {"iterations", r.iterations},
              {"stage_boundaries", r.stage_boundaries},
              {"stage_kernels", r.stage_kernels},
              {"stage_final_losses", r.stage_final_losses},
              {"gradient_warning", r.gradient_warning},
              {"runtime_seconds", r.runtime_seconds}};
}

std::string loss_trace_csv(const FitResult& r) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t m = r.trace.empty() ? 0 : r.trace.front().image_losses.size();
  out << "iteration,kernel,total";
  for (std::size_t i = 0; i < m; ++i) out << ",loss_" << i;
  out << "\n";
  for (const LossRecord& rec : r.trace) {
    out << rec.iteration << ',' << rec.kernel_size << ',' << rec.total;
    for (double v : rec.image_losses) out << ',' << v;
    out << "\n";
  }
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace streakfit
