#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "streakfit/optimizer.hpp"
#include "streakfit/orbit.hpp"
#include "streakfit/render.hpp"

namespace streakfit {

using Json = nlohmann::ordered_json;

inline constexpr std::uint32_t kStrkVersion = 1;
inline constexpr std::size_t kStrkHeaderBytes = 16;

/// "STRK", u32 width, u32 height, u32 version, then width * height
/// little-endian float32 values, row-major. Values are narrowed to float, so
/// the round trip is bit-exact for grids that already hold float values.
std::vector<std::uint8_t> encode_grid(const Grid& g);
/// Throws IoError on a bad magic, unknown version or size mismatch.
Grid decode_grid(const std::vector<std::uint8_t>& bytes);

void write_grid_file(const std::filesystem::path& path, const Grid& g);
Grid read_grid_file(const std::filesystem::path& path);

Json elements_to_json(const KeplerianElements& el);
KeplerianElements elements_from_json(const Json& j);

/// {"epoch_jd", "position_km", "velocity_km_s"}.
Json state_to_json(const OrbitState& s);
OrbitState state_from_json(const Json& j);

/// Ground-truth elements and the epoch at which they hold.
struct TruthRecord {
  KeplerianElements elements;
  double epoch = 0.0;

  OrbitState state() const { return elements_to_state(elements, epoch); }
};

/// Everything except the pixels; `truth` is written when given.
Json sidecar_json(const StreakImage& img, const std::optional<TruthRecord>& truth = {});
/// Rebuilds the image around `pixels`, including camera frames. Throws IoError
/// for missing fields, a crop that does not match the grid or JD end <= start.
StreakImage image_from_sidecar(const Json& j, Grid pixels);

/// The sidecar sits next to the grid with a .json extension.
std::filesystem::path sidecar_path(const std::filesystem::path& grid_path);

/// Writes <stem>.strk and <stem>.json.
void write_observation(const std::filesystem::path& stem, const StreakImage& img,
                       const std::optional<TruthRecord>& truth = {});

struct LoadedObservation {
  StreakImage image;
  std::optional<TruthRecord> truth;
};

/// Accepts either the .strk or the .json path.
LoadedObservation read_observation(const std::filesystem::path& path);

/// Lines of key = value; '#' starts a comment, blank lines are skipped.
/// Throws InvalidArgument on a line without '=' or a repeated key.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Overrides FitConfig fields by name (h, step_size, k_max, scaling, ...).
/// Throws InvalidArgument for unknown keys or unparsable values.
void apply_fit_config(FitConfig& cfg, const std::map<std::string, std::string>& values);

const std::vector<std::string>& fit_config_keys();

Json fit_result_json(const FitResult& r);
/// iteration,kernel,total,loss_0..loss_{M-1}
std::string loss_trace_csv(const FitResult& r);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace streakfit
