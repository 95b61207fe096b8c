#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "pcflow/error.hpp"
#include "pcflow/phantom.hpp"

namespace pcflow {

using Json = nlohmann::json;

namespace {

template <typename T>
T as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(fmt::format("phantom field '{}': {}", key, e.what()));
  }
}

void apply_artefacts(PhantomArtefacts& a, const Json& j) {
  if (!j.is_object()) throw ConfigError("phantom field 'artefacts' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "aliasing_fraction") a.aliasing_fraction = as<double>(value, key);
    else if (key == "spike_frame") {
      if (value.is_null()) a.spike_frame.reset();
      else a.spike_frame = as<std::size_t>(value, key);
    } else if (key == "spike_factor") a.spike_factor = as<double>(value, key);
    else if (key == "noise_sigma_cm_s") a.noise_sigma_cm_s = as<double>(value, key);
    else throw ConfigError(fmt::format("unknown artefact field '{}'", key));
  }
}

void apply_fields(PhantomConfig& c, const Json& j) {
  if (!j.is_object()) throw ConfigError("phantom description must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "series_id") c.series_id = as<std::string>(value, key);
    else if (key == "vendor_tag") c.vendor_tag = as<std::string>(value, key);
    else if (key == "vessel_radius_cm") c.vessel_radius_cm = as<double>(value, key);
    else if (key == "peak_velocity_cm_s") c.peak_velocity_cm_s = as<double>(value, key);
    else if (key == "venc_cm_s") c.venc_cm_s = as<double>(value, key);
    else if (key == "grid_spacing_mm") c.grid_spacing_mm = as<double>(value, key);
    else if (key == "image_size") c.image_size = as<std::size_t>(value, key);
    else if (key == "num_frames") c.num_frames = as<std::size_t>(value, key);
    else if (key == "frame_interval_s") c.frame_interval_s = as<double>(value, key);
    else if (key == "waveform") c.waveform = parse_waveform(as<std::string>(value, key));
    else if (key == "systolic_fraction") c.systolic_fraction = as<double>(value, key);
    else if (key == "baseline_velocity_cm_s") c.baseline_velocity_cm_s = as<double>(value, key);
    else if (key == "centre_offset_row_px") c.centre_offset_row_px = as<double>(value, key);
    else if (key == "centre_offset_col_px") c.centre_offset_col_px = as<double>(value, key);
    else if (key == "view") c.view = parse_view_label(as<std::string>(value, key));
    else if (key == "artefacts") apply_artefacts(c.artefacts, value);
    else if (key == "magnitude_inside") c.magnitude_inside = as<std::uint16_t>(value, key);
    else if (key == "magnitude_outside") c.magnitude_outside = as<std::uint16_t>(value, key);
    else if (key == "rng_seed") c.rng_seed = as<std::uint64_t>(value, key);
    else throw ConfigError(fmt::format("unknown phantom field '{}'", key));
  }
}

}  // namespace

PhantomBatch parse_phantom_batch(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ConfigError(fmt::format("phantom config is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("phantom config must be a JSON object");

  PhantomBatch batch;
  PhantomConfig defaults;
  const bool single = !doc.contains("series") && !doc.contains("random");
  for (const auto& [key, value] : doc.items()) {
    if (key == "dicom") batch.export_options.dicom = as<bool>(value, key);
    else if (key == "portable") batch.export_options.portable = as<bool>(value, key);
    else if (key == "defaults") apply_fields(defaults, value);
    else if (key != "series" && key != "random" && !single) throw ConfigError(fmt::format("unknown batch field '{}'", key));
  }

  if (single) {
    Json body = doc;
    body.erase("dicom");
    body.erase("portable");
    body.erase("defaults");
    PhantomConfig c = defaults;
    apply_fields(c, body);
    batch.configs.push_back(c);
  }
  if (doc.contains("series")) {
    if (!doc["series"].is_array()) throw ConfigError("'series' must be an array");
    for (const auto& entry : doc["series"]) {
      PhantomConfig c = defaults;
      apply_fields(c, entry);
      batch.configs.push_back(c);
    }
  }
  if (doc.contains("random")) {
    const Json& r = doc["random"];
    if (!r.is_object()) throw ConfigError("'random' must be an object");
    const auto count = r.contains("count") ? as<std::size_t>(r["count"], "count") : std::size_t{0};
    const auto seed = r.contains("seed") ? as<std::uint64_t>(r["seed"], "seed") : std::uint64_t{0};
    const double aliased = r.contains("aliased_fraction") ? as<double>(r["aliased_fraction"], "aliased_fraction") : 0.0;
    if (!(aliased >= 0.0 && aliased <= 1.0)) throw ConfigError("'aliased_fraction' must lie in [0, 1]");
    std::vector<ViewLabel> views = {ViewLabel::kAscendingAorta, ViewLabel::kPulmonaryArtery, ViewLabel::kOther};
    if (r.contains("views")) {
      views.clear();
      for (const auto& v : r["views"]) views.push_back(parse_view_label(as<std::string>(v, "views")));
      if (views.empty()) throw ConfigError("'views' must not be empty");
    }
    for (const auto& [key, value] : r.items())
      if (key != "count" && key != "seed" && key != "aliased_fraction" && key != "views")
        throw ConfigError(fmt::format("unknown random field '{}'", key));
    const auto aliased_count = static_cast<std::size_t>(std::llround(aliased * static_cast<double>(count)));
    for (std::size_t i = 0; i < count; ++i) {
      PhantomConfig c = random_phantom_config(mix_seed(seed, 3, i), views[i % views.size()], i < aliased_count);
      c.series_id = fmt::format("rand{:04d}", i);
      batch.configs.push_back(c);
    }
  }

  std::set<std::string> ids;
  for (const auto& c : batch.configs)
    if (!ids.insert(c.series_id).second) throw ConfigError(fmt::format("duplicate phantom series id '{}'", c.series_id));
  if (batch.configs.empty()) throw ConfigError("phantom config describes no series");
  return batch;
}

}  // namespace pcflow
