#include "pcflow/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <map>
#include <set>

#include <fmt/format.h>

#include "pcflow/dicom.hpp"
#include "pcflow/error.hpp"
#include "pcflow/evaluate.hpp"
#include "pcflow/portable.hpp"

namespace pcflow {

namespace fs = std::filesystem;

namespace {

bool has_dicom_files(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".dcm" || entry.path().filename() == kSidecarName) return true;
  }
  return false;
}

bool safe_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && id.find_first_of("/\\") == std::string::npos;
}

}  // namespace

std::vector<StudySeries> load_study_series(const fs::path& study, std::vector<SkippedInput>& skipped) {
  if (!fs::is_directory(study)) throw IoError(fmt::format("'{}' is not a directory", study.string()));
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(study)) entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());

  std::vector<StudySeries> out;
  auto add = [&](PhaseContrastSeries s, const std::string& source) {
    if (!safe_id(s.meta.series_id)) {
      skipped.push_back({source, fmt::format("unusable series id '{}'", s.meta.series_id)});
      return;
    }
    out.push_back({std::move(s), source});
  };
  auto attempt = [&](const std::string& source, auto&& load) {
    try {
      load();
    } catch (const Error& e) {
      skipped.push_back({source, e.what()});
    }
  };

  if (has_dicom_files(study)) {
    attempt(".", [&] { add(parse_dicom_series(study), "."); });
  } else {
    for (const auto& path : entries) {
      const std::string source = path.filename().string();
      if (fs::is_regular_file(path) && path.extension() == ".pcs") {
        attempt(source, [&] {
          for (auto& s : parse_portable_study(path)) add(std::move(s), source);
        });
      } else if (fs::is_directory(path) && has_dicom_files(path)) {
        attempt(source, [&] { add(parse_dicom_series(path), source); });
      }
    }
  }

  std::set<std::string> seen;
  for (const auto& s : out)
    if (!seen.insert(s.series.meta.series_id).second)
      throw ConfigError(fmt::format("duplicate series id '{}' in study", s.series.meta.series_id));
  return out;
}

namespace {

std::optional<ClassifierModel> load_stage_model(const std::optional<fs::path>& file, bool skip, const char* stage) {
  if (skip) return std::nullopt;
  if (!file) throw ConfigError(fmt::format("{} stage is enabled but no model checkpoint was given", stage));
  if (!fs::exists(*file)) throw ConfigError(fmt::format("{} model '{}' does not exist", stage, file->string()));
  return ClassifierModel::load(*file);
}

SegmentationMask segment(const PhaseContrastSeries& series, const PipelineConfig& config,
                         std::vector<PropagationWarning>& warnings) {
  if (config.masks) {
    fs::path file = *config.masks;
    if (fs::is_directory(file)) file /= series.meta.series_id + ".pcm";
    return load_external_masks(file, series);
  }
  const SeedPoint& p = *config.seed;
  SeedContour seed{p.frame, {Pixel{p.row, p.col}}};
  auto result = propagate_segmentation(series, seed, config.propagation);
  warnings = std::move(result.warnings);
  return std::move(result.mask);
}

SeriesReport analyze(const StudySeries& in, const PipelineConfig& config, const ClassifierModel* view_model,
                     const ClassifierModel* qc_model) {
  const auto& series = in.series;
  SeriesReport r;
  r.series_id = series.meta.series_id;
  r.source = in.source;
  auto reject = [&](std::string reason) {
    r.status = SeriesStatus::kRejected;
    r.reason = std::move(reason);
    return r;
  };

  if (view_model) {
    r.view = predict_view(*view_model, view_input(series));
    if (r.view->label == ViewLabel::kOther) return reject("view:other");
  }
  if (qc_model) {
    r.learned_qc = predict_qc(*qc_model, qc_input(series), config.qc_threshold);
    if (r.learned_qc->label == QCVerdict::kArtefact && !config.force) return reject("qc:learned");
  }

  try {
    r.mask = segment(series, config, r.warnings);
  } catch (const Error& e) {
    r.status = SeriesStatus::kFailed;
    r.reason = fmt::format("segmentation: {}", e.what());
    return r;
  }

  const VelocityMap velocity = reconstruct_velocity(series, config.velocity);
  r.curve = compute_flow_curve(velocity, *r.mask);
  r.rule_qc = run_qc_rules(velocity, *r.mask, *r.curve, config.aliasing, config.plausibility);
  if (!r.rule_qc->passed() && !config.force)
    return reject(r.rule_qc->aliasing_flag ? "qc:aliasing" : "qc:implausible");
  r.flow = extract_parameters(*r.curve);
  return r;
}

}  // namespace

SeedPoint parse_seed_point(std::string_view text) {
  SeedPoint p;
  std::size_t* fields[] = {&p.row, &p.col, &p.frame};
  std::size_t i = 0;
  const char* cur = text.data();
  const char* end = text.data() + text.size();
  for (; i < 3; ++i) {
    auto [next, ec] = std::from_chars(cur, end, *fields[i]);
    if (ec != std::errc{} || next == cur) break;
    cur = next;
    if (i < 2) {
      if (cur == end || *cur != ',') break;
      ++cur;
    }
  }
  if (i != 3 || cur != end) throw ConfigError(fmt::format("seed '{}' is not of the form row,col,frame", text));
  return p;
}

std::vector<LabeledImage> load_training_set(const fs::path& dataset, TrainingTarget target) {
  const fs::path truth_file = dataset / "truth" / "truth.json";
  if (!fs::exists(truth_file)) throw ConfigError(fmt::format("'{}' not found", truth_file.string()));
  std::map<std::string, TruthRecord> truth;
  for (auto& t : read_truth(truth_file)) truth.emplace(t.series_id, std::move(t));

  std::vector<SkippedInput> skipped;
  std::vector<StudySeries> series;
  for (const char* sub : {"study", "dicom"}) {
    if (!fs::is_directory(dataset / sub)) continue;
    series = load_study_series(dataset / sub, skipped);
    if (!series.empty()) break;
  }
  if (series.empty()) throw EmptyStudyError(fmt::format("no parseable series under '{}'", dataset.string()));
  std::sort(series.begin(), series.end(),
            [](const StudySeries& a, const StudySeries& b) { return a.series.meta.series_id < b.series.meta.series_id; });

  std::vector<LabeledImage> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto it = truth.find(series[i].series.meta.series_id);
    if (it == truth.end()) throw JoinError(fmt::format("series '{}' has no label", series[i].series.meta.series_id));
    if (target == TrainingTarget::kView)
      out[i] = {view_input(series[i].series), static_cast<std::size_t>(it->second.view)};
    else
      out[i] = {qc_input(series[i].series), static_cast<std::size_t>(it->second.qc)};
  }
  return out;
}

std::string_view to_string(SeriesStatus status) {
  switch (status) {
    case SeriesStatus::kAnalyzed: return "analyzed";
    case SeriesStatus::kRejected: return "rejected";
    case SeriesStatus::kFailed: return "failed";
  }
  return "unknown";
}

StudyReport run_pipeline(const fs::path& study, const PipelineConfig& config) {
  if (config.masks.has_value() == config.seed.has_value())
    throw ConfigError("exactly one segmentation source is required: external masks or a propagation seed");
  if (!(config.propagation.threshold_fraction > 0.0 && config.propagation.threshold_fraction < 1.0))
    throw ConfigError(fmt::format("threshold fraction {} outside (0, 1)", config.propagation.threshold_fraction));

  const auto view_model = load_stage_model(config.view_model, config.skip_view, "view");
  const auto qc_model = load_stage_model(config.qc_model, config.skip_qc, "QC");
  if (view_model && (view_model->num_classes() != kViewClasses || view_model->head() != nn::Head::kSoftmax))
    throw ConfigError("view model must be a 3-class softmax classifier");
  if (qc_model && qc_model->num_classes() != 2) throw ConfigError("QC model must be a 2-class classifier");

  StudyReport report;
  auto& prov = report.provenance;
  prov.formula = config.velocity.formula;
  prov.phase_range = config.velocity.phase_range;
  prov.segmentation = config.masks ? "external" : "propagated";
  prov.threshold_fraction = config.propagation.threshold_fraction;
  prov.connectivity = config.propagation.connectivity;
  prov.qc_threshold = config.qc_threshold;
  prov.aliasing_saturation = config.aliasing.saturation_fraction;
  prov.aliasing_flag_threshold = config.aliasing.flag_threshold;
  prov.closing_fraction = config.plausibility.closing_fraction;
  prov.spike_factor = config.plausibility.spike_factor;
  prov.force = config.force;
  if (view_model) prov.view_model_checksum = file_checksum(*config.view_model);
  if (qc_model) prov.qc_model_checksum = file_checksum(*config.qc_model);

  auto inputs = load_study_series(study, report.skipped);
  if (inputs.empty()) throw EmptyStudyError(fmt::format("no parseable series in '{}'", study.string()));
  std::sort(inputs.begin(), inputs.end(),
            [](const StudySeries& a, const StudySeries& b) { return a.series.meta.series_id < b.series.meta.series_id; });

  report.series.resize(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  const auto count = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      report.series[i] = analyze(inputs[i], config, view_model ? &*view_model : nullptr, qc_model ? &*qc_model : nullptr);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return report;
}

}  // namespace pcflow
