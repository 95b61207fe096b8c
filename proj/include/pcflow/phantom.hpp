#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcflow/classify.hpp"
#include "pcflow/flow.hpp"
#include "pcflow/segment.hpp"
#include "pcflow/series.hpp"

namespace pcflow {

enum class Waveform {
  kConstant,  // centreline velocity = peak at every frame
  kHalfSine,  // baseline + (peak - baseline) sin(pi t / T_sys) in systole, baseline after
};

std::string_view to_string(Waveform waveform);
Waveform parse_waveform(std::string_view text);

struct PhantomArtefacts {
  double aliasing_fraction = 0.0;      // share of lumen pixels wrapped by 2 VENC, every frame
  std::optional<std::size_t> spike_frame;
  double spike_factor = 10.0;          // velocity multiplier on the spike frame
  double noise_sigma_cm_s = 0.0;       // Gaussian velocity noise on every pixel

  bool labelled_artefact() const { return aliasing_fraction > 0.0 || spike_frame.has_value(); }
};

struct PhantomConfig {
  std::string series_id = "phantom";
  std::string vendor_tag = "pcflow-phantom";
  double vessel_radius_cm = 1.5;
  double peak_velocity_cm_s = 100.0;
  double venc_cm_s = 150.0;
  double grid_spacing_mm = 0.5;
  std::size_t image_size = 96;
  std::size_t num_frames = 30;
  double frame_interval_s = 0.03;
  Waveform waveform = Waveform::kConstant;
  double systolic_fraction = 0.4;
  double baseline_velocity_cm_s = 0.0;
  double centre_offset_row_px = 0.0;
  double centre_offset_col_px = 0.0;
  ViewLabel view = ViewLabel::kAscendingAorta;
  PhantomArtefacts artefacts;
  std::uint16_t magnitude_inside = 1000;
  std::uint16_t magnitude_outside = 50;
  std::uint64_t rng_seed = 0;
};

struct FlowTruth {
  double peak_ml_s = 0.0;
  double net_ml = 0.0;
  double forward_ml = 0.0;
  double backward_ml = 0.0;  // signed, <= 0
};

struct PhantomTruth {
  SegmentationMask mask;
  std::vector<double> flow_rate_ml_s;  // analytic rate sampled at each frame time
  FlowTruth flow;                      // analytic integrals over one cycle
  ViewLabel view = ViewLabel::kAscendingAorta;
  QCVerdict artefact_label = QCVerdict::kPass;
  std::size_t lumen_pixels = 0;
  std::size_t wrapped_pixels_per_frame = 0;
  double aliasing_fraction = 0.0;  // wrapped / lumen, exact
};

struct Phantom {
  PhaseContrastSeries series;
  PhantomTruth truth;
};

// Circular vessel with a Poiseuille profile. Raw pixels invert the paper-mode
// velocity formula with a constant magnitude plateau in the lumen, so
// reconstruction returns the quantised phantom velocities (|P| <= 30000).
Phantom generate_phantom(const PhantomConfig& config);

// Analytic flow rate at time t (ml/s).
double analytic_flow_rate(const PhantomConfig& config, double t);
FlowTruth analytic_flow_truth(const PhantomConfig& config);

struct ExportOptions {
  bool portable = true;
  bool dicom = false;
};

// Layout under `directory`:
//   study/<id>.pcs            portable container (one series per file)
//   dicom/<id>/               DICOM subset + sidecar (optional)
//   truth/<id>.pcm            ground-truth mask
//   truth/truth.json          labels and analytic flow parameters
void export_phantoms(std::span<const Phantom> phantoms, const std::filesystem::path& directory,
                     const ExportOptions& options = {});

// Bright disks (label 0) and bright rings (label 1) of random size and
// position on a dark noisy background, already at classifier resolution.
std::vector<LabeledImage> make_shape_corpus(std::size_t count, std::uint64_t seed);

// View corpus from small phantoms, labels cycling through the first `classes`
// view labels (2: aorta vs pulmonary artery, 3: adds Other).
std::vector<LabeledImage> make_view_corpus(std::size_t count, std::uint64_t seed, std::size_t classes = kViewClasses);

// Clean (label 0) vs aliased (label 1) phantoms.
std::vector<LabeledImage> make_qc_corpus(std::size_t count, std::uint64_t seed);

// Randomised but valid configuration drawn from `seed`, used by corpora and tests.
PhantomConfig random_phantom_config(std::uint64_t seed, ViewLabel view, bool aliased);

struct PhantomBatch {
  std::vector<PhantomConfig> configs;
  ExportOptions export_options;
};

// JSON batch description:
//   {"dicom": bool, "portable": bool, "defaults": {...},
//    "series": [{...}, ...],
//    "random": {"count": N, "seed": S, "views": [...], "aliased_fraction": f}}
// Series objects use the PhantomConfig field names; "artefacts" holds
// aliasing_fraction, spike_frame, spike_factor and noise_sigma_cm_s.
PhantomBatch parse_phantom_batch(std::string_view json_text);

}  // namespace pcflow
