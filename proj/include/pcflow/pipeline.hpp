#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcflow/classify.hpp"
#include "pcflow/flow.hpp"
#include "pcflow/qc_rules.hpp"
#include "pcflow/segment.hpp"
#include "pcflow/velocity.hpp"

namespace pcflow {

struct SeedPoint {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t frame = 0;
};

// "r,c,frame"
SeedPoint parse_seed_point(std::string_view text);

struct PipelineConfig {
  VelocityOptions velocity;
  std::optional<std::filesystem::path> view_model;
  std::optional<std::filesystem::path> qc_model;
  bool skip_view = false;
  bool skip_qc = false;
  double qc_threshold = 0.5;
  // Exactly one segmentation source: a .pcm file (shared by every series), a
  // directory of <series_id>.pcm files, or a propagation seed.
  std::optional<std::filesystem::path> masks;
  std::optional<SeedPoint> seed;
  PropagationOptions propagation;
  AliasingOptions aliasing;
  PlausibilityOptions plausibility;
  bool force = false;  // quantify series that failed QC
};

enum class SeriesStatus { kAnalyzed, kRejected, kFailed };
std::string_view to_string(SeriesStatus status);

struct SeriesReport {
  std::string series_id;
  std::string source;  // path of the container or directory, relative to the study
  SeriesStatus status = SeriesStatus::kAnalyzed;
  std::string reason;  // set when rejected or failed
  std::optional<ViewPrediction> view;
  std::optional<QCLabel> learned_qc;
  std::optional<QCReport> rule_qc;
  std::optional<SegmentationMask> mask;
  std::vector<PropagationWarning> warnings;
  std::optional<FlowCurve> curve;
  std::optional<FlowParameters> flow;  // only for analyzed series
};

struct Provenance {
  VelocityFormula formula = VelocityFormula::kPaper;
  double phase_range = 0.0;
  std::string segmentation;  // "external" or "propagated"
  double threshold_fraction = 0.0;
  Connectivity connectivity = Connectivity::kFour;
  double qc_threshold = 0.0;
  double aliasing_saturation = 0.0;
  double aliasing_flag_threshold = 0.0;
  double closing_fraction = 0.0;
  double spike_factor = 0.0;
  bool force = false;
  std::optional<std::string> view_model_checksum;
  std::optional<std::string> qc_model_checksum;
};

struct SkippedInput {
  std::string source;
  std::string error;
};

struct StudyReport {
  Provenance provenance;
  std::vector<SeriesReport> series;  // sorted by series_id
  std::vector<SkippedInput> skipped;  // inputs that could not be parsed
};

struct StudySeries {
  PhaseContrastSeries series;
  std::string source;
};

// *.pcs files and DICOM directories directly under `study`, in name order; a
// study that is itself a DICOM directory holds one series. Inputs that fail
// to parse are listed in `skipped`.
std::vector<StudySeries> load_study_series(const std::filesystem::path& study, std::vector<SkippedInput>& skipped);

enum class TrainingTarget { kView, kQC };

// Dataset in the phantom export layout: series under <dataset>/study (or
// <dataset>/dicom) and labels in <dataset>/truth/truth.json.
std::vector<LabeledImage> load_training_set(const std::filesystem::path& dataset, TrainingTarget target);

// View selection -> learned QC -> segmentation -> velocity -> flow -> rule QC.
// Series classified Other stop after view selection; series failing QC are
// reported without flow parameters unless `force` is set.
StudyReport run_pipeline(const std::filesystem::path& study, const PipelineConfig& config);

// report.json, report.csv, curves/<id>.svg and masks/<id>.pcm, each written
// atomically. Output depends only on the report contents.
void write_report(const StudyReport& report, const std::filesystem::path& out_dir);

std::string report_json(const StudyReport& report);
std::string report_csv(const StudyReport& report);
std::string flow_curve_svg(const std::string& title, const FlowCurve& curve);

}  // namespace pcflow
