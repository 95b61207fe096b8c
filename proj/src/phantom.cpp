#include "pcflow/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "pcflow/dicom.hpp"
#include "pcflow/error.hpp"
#include "pcflow/io.hpp"
#include "pcflow/portable.hpp"
#include "pcflow/rng.hpp"

namespace pcflow {

namespace {

constexpr double kMaxPhaseMagnitude = 30000.0;
constexpr double kPi = std::numbers::pi;

void check_config(const PhantomConfig& c) {
  auto fail = [&](const std::string& what) { throw ConfigError(fmt::format("phantom '{}': {}", c.series_id, what)); };
  if (!(c.vessel_radius_cm > 0.0)) fail("vessel radius must be positive");
  if (!(c.peak_velocity_cm_s > 0.0)) fail("peak velocity must be positive");
  if (!(c.venc_cm_s > 0.0)) fail("VENC must be positive");
  if (!(c.grid_spacing_mm > 0.0)) fail("grid spacing must be positive");
  if (!(c.frame_interval_s > 0.0)) fail("frame interval must be positive");
  if (c.image_size < kMinImageExtent) fail(fmt::format("image size must be at least {}", kMinImageExtent));
  if (c.num_frames < 1) fail("at least one frame is required");
  if (c.waveform == Waveform::kHalfSine) {
    if (!(c.systolic_fraction > 0.0 && c.systolic_fraction <= 1.0)) fail("systolic fraction must lie in (0, 1]");
    if (!std::isfinite(c.baseline_velocity_cm_s) || c.baseline_velocity_cm_s > c.peak_velocity_cm_s)
      fail("baseline velocity must not exceed the peak");
  }
  const auto& a = c.artefacts;
  if (!(a.aliasing_fraction >= 0.0 && a.aliasing_fraction <= 1.0)) fail("aliasing fraction must lie in [0, 1]");
  if (!(a.noise_sigma_cm_s >= 0.0)) fail("noise sigma must be non-negative");
  if (a.spike_frame && *a.spike_frame >= c.num_frames) fail("spike frame out of range");
  if (a.spike_frame && !(std::isfinite(a.spike_factor) && a.spike_factor != 0.0)) fail("spike factor must be non-zero");
  if (a.aliasing_fraction == 0.0) {
    const double extreme = std::max(c.peak_velocity_cm_s,
                                    c.waveform == Waveform::kHalfSine ? std::abs(c.baseline_velocity_cm_s) : 0.0);
    if (extreme > c.venc_cm_s) fail("peak velocity exceeds VENC without an aliasing artefact");
  }
  if (c.magnitude_inside == 0 || c.magnitude_outside == 0) fail("magnitude levels must be positive");

  const double radius_px = c.vessel_radius_cm * 10.0 / c.grid_spacing_mm;
  const double centre = (static_cast<double>(c.image_size) - 1.0) / 2.0;
  const double cr = centre + c.centre_offset_row_px;
  const double cc = centre + c.centre_offset_col_px;
  const double hi = static_cast<double>(c.image_size) - 1.0;
  if (cr - radius_px < 0.0 || cc - radius_px < 0.0 || cr + radius_px > hi || cc + radius_px > hi)
    fail("vessel does not fit inside the image");
}

// Centreline velocity at time t, before artefacts.
double centreline_velocity(const PhantomConfig& c, double t) {
  if (c.waveform == Waveform::kConstant) return c.peak_velocity_cm_s;
  const double period = static_cast<double>(c.num_frames) * c.frame_interval_s;
  const double systole = c.systolic_fraction * period;
  const double b = c.baseline_velocity_cm_s;
  if (t < systole) return b + (c.peak_velocity_cm_s - b) * std::sin(kPi * t / systole);
  return b;
}

double lumen_area_cm2(const PhantomConfig& c) { return kPi * c.vessel_radius_cm * c.vessel_radius_cm; }

struct Companion {
  double row = 0.0;
  double col = 0.0;
  double dir_row = 0.0;  // unit vector from the vessel towards the companion
  double dir_col = 0.0;
};

// Magnitude-only structures that tell the view classes apart.
bool in_companion(const PhantomConfig& c, const Companion& k, double radius_px, double r, double col) {
  const double dr = r - k.row;
  const double dc = col - k.col;
  switch (c.view) {
    case ViewLabel::kAscendingAorta:
      return dr * dr + dc * dc < std::pow(0.6 * radius_px, 2);
    case ViewLabel::kPulmonaryArtery: {
      const double d2 = dr * dr + dc * dc;
      return d2 < std::pow(0.8 * radius_px, 2) && d2 >= std::pow(0.5 * radius_px, 2);
    }
    case ViewLabel::kOther: {
      // Bar tangent to the vessel: along = perpendicular to the radial direction.
      const double across = dr * k.dir_row + dc * k.dir_col;
      const double along = -dr * k.dir_col + dc * k.dir_row;
      return std::abs(across) < 0.25 * radius_px && std::abs(along) < 1.5 * radius_px;
    }
  }
  return false;
}

}  // namespace

std::string_view to_string(Waveform waveform) {
  return waveform == Waveform::kConstant ? "constant" : "half_sine";
}

Waveform parse_waveform(std::string_view text) {
  if (text == "constant") return Waveform::kConstant;
  if (text == "half_sine" || text == "half-sine") return Waveform::kHalfSine;
  throw ConfigError(fmt::format("unknown waveform '{}'", text));
}

double analytic_flow_rate(const PhantomConfig& config, double t) {
  return 0.5 * centreline_velocity(config, t) * lumen_area_cm2(config);
}

FlowTruth analytic_flow_truth(const PhantomConfig& c) {
  check_config(c);
  const double area = 0.5 * lumen_area_cm2(c);  // rate per unit centreline velocity
  const double period = static_cast<double>(c.num_frames) * c.frame_interval_s;
  FlowTruth truth;
  if (c.waveform == Waveform::kConstant) {
    const double q = c.peak_velocity_cm_s * area;
    truth.peak_ml_s = q;
    truth.net_ml = q * period;
    truth.forward_ml = std::max(q, 0.0) * period;
    truth.backward_ml = std::min(q, 0.0) * period;
    return truth;
  }
  const double systole = c.systolic_fraction * period;
  const double b = c.baseline_velocity_cm_s;
  const double amp = c.peak_velocity_cm_s - b;
  const double net_v = b * period + amp * 2.0 / kPi * systole;
  double forward_v;
  if (b >= 0.0) {
    forward_v = net_v;
  } else if (c.peak_velocity_cm_s <= 0.0) {
    forward_v = 0.0;
  } else {
    // b + amp sin(theta) > 0 for theta in (theta0, pi - theta0).
    const double theta0 = std::asin(-b / amp);
    forward_v = systole / kPi * (b * (kPi - 2.0 * theta0) + 2.0 * amp * std::cos(theta0));
  }
  truth.peak_ml_s = c.peak_velocity_cm_s * area;
  truth.net_ml = net_v * area;
  truth.forward_ml = forward_v * area;
  truth.backward_ml = truth.net_ml - truth.forward_ml;
  return truth;
}

Phantom generate_phantom(const PhantomConfig& c) {
  check_config(c);
  const std::size_t n = c.image_size;
  const std::size_t frames = c.num_frames;
  const Dims dims{frames, n, n};
  const double h_cm = c.grid_spacing_mm / 10.0;
  const double radius_px = c.vessel_radius_cm / h_cm;
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const double cr = centre + c.centre_offset_row_px;
  const double cc = centre + c.centre_offset_col_px;

  Rng rng(mix_seed(c.rng_seed, 0x5048414eull));
  const double angle = rng.uniform(0.0, 2.0 * kPi);
  const double gap = std::max(3.0, 0.3 * radius_px);
  const double companion_extent = c.view == ViewLabel::kAscendingAorta    ? 0.6 * radius_px
                                  : c.view == ViewLabel::kPulmonaryArtery ? 0.8 * radius_px
                                                                          : 0.25 * radius_px;
  Companion companion;
  companion.dir_row = std::sin(angle);
  companion.dir_col = std::cos(angle);
  const double distance = radius_px + gap + companion_extent;
  companion.row = cr + distance * companion.dir_row;
  companion.col = cc + distance * companion.dir_col;

  // Static geometry: lumen profile (1 - rho^2/r^2) and magnitude.
  std::vector<double> profile(n * n, 0.0);
  std::vector<std::uint8_t> lumen(n * n, 0);
  std::vector<std::uint16_t> magnitude(n * n, c.magnitude_outside);
  std::size_t lumen_pixels = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(col) - cc;
      const double rho2 = (dr * dr + dc * dc) / (radius_px * radius_px);
      const std::size_t i = r * n + col;
      if (rho2 < 1.0) {
        lumen[i] = 1;
        profile[i] = 1.0 - rho2;
        magnitude[i] = c.magnitude_inside;
        ++lumen_pixels;
      } else if (in_companion(c, companion, radius_px, static_cast<double>(r), static_cast<double>(col))) {
        magnitude[i] = c.magnitude_inside;
      }
    }
  }

  // Lumen pixels ordered by decreasing profile, ties by scan order; the
  // aliasing artefact wraps a prefix of this list in every frame.
  std::vector<std::size_t> by_speed;
  by_speed.reserve(lumen_pixels);
  for (std::size_t i = 0; i < n * n; ++i)
    if (lumen[i]) by_speed.push_back(i);
  std::stable_sort(by_speed.begin(), by_speed.end(), [&](std::size_t a, std::size_t b) { return profile[a] > profile[b]; });
  const auto wrapped = static_cast<std::size_t>(
      std::llround(c.artefacts.aliasing_fraction * static_cast<double>(lumen_pixels)));

  Volume<double> velocity(dims, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) * c.frame_interval_s;
    double vc = centreline_velocity(c, t);
    if (c.artefacts.spike_frame && *c.artefacts.spike_frame == f) vc *= c.artefacts.spike_factor;
    auto frame = velocity.frame(f);
    for (std::size_t i = 0; i < n * n; ++i) frame[i] = vc * profile[i];
    for (std::size_t k = 0; k < wrapped; ++k) {
      double& v = frame[by_speed[k]];
      v -= 2.0 * c.venc_cm_s * (v >= 0.0 ? 1.0 : -1.0);
    }
    if (c.artefacts.noise_sigma_cm_s > 0.0)
      for (double& v : frame) v += rng.normal(0.0, c.artefacts.noise_sigma_cm_s);
  }

  // Raw encoding under v = (10 pi R / VENC) P M with M fixed per pixel.
  double max_ratio = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    auto frame = velocity.frame(f);
    for (std::size_t i = 0; i < n * n; ++i) max_ratio = std::max(max_ratio, std::abs(frame[i]) / magnitude[i]);
  }
  const double k = max_ratio > 0.0 ? max_ratio / kMaxPhaseMagnitude : 10.0 * kPi / c.venc_cm_s;

  Phantom out;
  auto& s = out.series;
  s.meta.venc_cm_s = c.venc_cm_s;
  s.meta.rescale_factor = k * c.venc_cm_s / (10.0 * kPi);
  s.meta.pixel_spacing_row_mm = c.grid_spacing_mm;
  s.meta.pixel_spacing_col_mm = c.grid_spacing_mm;
  s.meta.frame_interval_s = c.frame_interval_s;
  s.meta.rows = n;
  s.meta.cols = n;
  s.meta.num_frames = frames;
  s.meta.series_id = c.series_id;
  s.meta.vendor_tag = c.vendor_tag;
  s.magnitude = Volume<std::uint16_t>(dims);
  s.phase = Volume<std::int16_t>(dims);
  for (std::size_t f = 0; f < frames; ++f) {
    auto mag = s.magnitude.frame(f);
    auto pha = s.phase.frame(f);
    auto vel = velocity.frame(f);
    std::copy(magnitude.begin(), magnitude.end(), mag.begin());
    for (std::size_t i = 0; i < n * n; ++i)
      pha[i] = static_cast<std::int16_t>(std::lround(vel[i] / (k * magnitude[i])));
  }

  auto& truth = out.truth;
  truth.mask.source = MaskSource::kExternal;
  truth.mask.mask = Volume<std::uint8_t>(dims);
  for (std::size_t f = 0; f < frames; ++f) std::copy(lumen.begin(), lumen.end(), truth.mask.mask.frame(f).begin());
  truth.flow_rate_ml_s.resize(frames);
  for (std::size_t f = 0; f < frames; ++f)
    truth.flow_rate_ml_s[f] = analytic_flow_rate(c, static_cast<double>(f) * c.frame_interval_s);
  truth.flow = analytic_flow_truth(c);
  truth.view = c.view;
  truth.artefact_label = c.artefacts.labelled_artefact() ? QCVerdict::kArtefact : QCVerdict::kPass;
  truth.lumen_pixels = lumen_pixels;
  truth.wrapped_pixels_per_frame = wrapped;
  truth.aliasing_fraction = lumen_pixels ? static_cast<double>(wrapped) / static_cast<double>(lumen_pixels) : 0.0;
  return out;
}

void export_phantoms(std::span<const Phantom> phantoms, const std::filesystem::path& directory,
                     const ExportOptions& options) {
  namespace fs = std::filesystem;
  const fs::path study = directory / "study";
  const fs::path dicom = directory / "dicom";
  const fs::path truth_dir = directory / "truth";
  try {
    fs::create_directories(truth_dir);
    if (options.portable) fs::create_directories(study);
    if (options.dicom) fs::create_directories(dicom);
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }

  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& p : phantoms) {
    const std::string& id = p.series.meta.series_id;
    if (options.portable) write_portable_study(study / (id + ".pcs"), std::span(&p.series, 1));
    if (options.dicom) write_dicom_series(p.series, dicom / id);
    write_mask_file(truth_dir / (id + ".pcm"), p.truth.mask.mask);
    nlohmann::ordered_json e;
    e["series_id"] = id;
    e["view"] = std::string(to_string(p.truth.view));
    e["qc"] = std::string(to_string(p.truth.artefact_label));
    e["mask_file"] = id + ".pcm";
    e["peak_ml_s"] = p.truth.flow.peak_ml_s;
    e["net_ml"] = p.truth.flow.net_ml;
    e["forward_ml"] = p.truth.flow.forward_ml;
    e["backward_ml_abs"] = std::abs(p.truth.flow.backward_ml);
    e["aliasing_fraction"] = p.truth.aliasing_fraction;
    e["rates_ml_s"] = p.truth.flow_rate_ml_s;
    entries.push_back(std::move(e));
  }
  nlohmann::ordered_json doc;
  doc["series"] = std::move(entries);
  io::write_file_atomic(truth_dir / "truth.json", doc.dump(2) + "\n");
}

PhantomConfig random_phantom_config(std::uint64_t seed, ViewLabel view, bool aliased) {
  Rng rng(mix_seed(seed, 0x434f4e46ull));
  PhantomConfig c;
  c.series_id = fmt::format("ph{:016x}", seed);
  c.image_size = 112;
  c.grid_spacing_mm = 1.0;
  c.num_frames = 4;
  c.vessel_radius_cm = rng.uniform(1.2, 1.8);
  c.venc_cm_s = 150.0;
  c.peak_velocity_cm_s = rng.uniform(60.0, 130.0);
  c.centre_offset_row_px = rng.uniform(-6.0, 6.0);
  c.centre_offset_col_px = rng.uniform(-6.0, 6.0);
  c.view = view;
  c.artefacts.noise_sigma_cm_s = 1.0;
  if (aliased) c.artefacts.aliasing_fraction = rng.uniform(0.05, 0.2);
  c.rng_seed = rng.bits();
  return c;
}

std::vector<LabeledImage> make_shape_corpus(std::size_t count, std::uint64_t seed) {
  constexpr std::size_t n = kClassifierSize;
  std::vector<LabeledImage> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, 4, i));
    const std::size_t label = i % 2;
    const double outer = rng.uniform(20.0, 36.0);
    const double inner = label == 1 ? outer * rng.uniform(0.45, 0.65) : 0.0;
    const double margin = outer + 4.0;
    const double cr = rng.uniform(margin, static_cast<double>(n) - 1.0 - margin);
    const double cc = rng.uniform(margin, static_cast<double>(n) - 1.0 - margin);
    const double level = rng.uniform(0.7, 1.0);
    std::vector<double> image(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double d2 = std::pow(static_cast<double>(r) - cr, 2) + std::pow(static_cast<double>(c) - cc, 2);
        const bool on = d2 < outer * outer && d2 >= inner * inner;
        image[r * n + c] = (on ? level : 0.1) + rng.normal(0.0, 0.03);
      }
    }
    out[i] = {preprocess(image, n, n), label};
  }
  return out;
}

std::vector<LabeledImage> make_view_corpus(std::size_t count, std::uint64_t seed, std::size_t classes) {
  if (classes < 2 || classes > kViewClasses) throw ConfigError(fmt::format("view corpus needs 2 or 3 classes, got {}", classes));
  std::vector<LabeledImage> out(count);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < count; ++i) {
    const auto view = static_cast<ViewLabel>(i % classes);
    const auto phantom = generate_phantom(random_phantom_config(mix_seed(seed, 1, i), view, false));
    out[i] = {view_input(phantom.series), static_cast<std::size_t>(view)};
  }
  return out;
}

std::vector<LabeledImage> make_qc_corpus(std::size_t count, std::uint64_t seed) {
  std::vector<LabeledImage> out(count);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < count; ++i) {
    const bool aliased = i % 2 == 1;
    const auto view = static_cast<ViewLabel>((i / 2) % kViewClasses);
    const auto phantom = generate_phantom(random_phantom_config(mix_seed(seed, 2, i), view, aliased));
    out[i] = {qc_input(phantom.series), aliased ? std::size_t{1} : std::size_t{0}};
  }
  return out;
}

}  // namespace pcflow
