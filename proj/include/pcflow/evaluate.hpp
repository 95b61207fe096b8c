#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcflow/classify.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/volume.hpp"

namespace pcflow {

inline constexpr std::size_t kFlowParameterCount = 4;
inline constexpr std::array<const char*, kFlowParameterCount> kFlowParameterNames = {
    "peak_ml_s", "net_ml", "forward_ml", "backward_ml_abs"};
using FlowValues = std::array<double, kFlowParameterCount>;

struct TruthRecord {
  std::string series_id;
  ViewLabel view = ViewLabel::kAscendingAorta;
  QCVerdict qc = QCVerdict::kPass;
  std::optional<FlowValues> flow;
  std::optional<Volume<std::uint8_t>> mask;
};

struct PredictionRecord {
  std::string series_id;
  std::optional<ViewLabel> view;
  std::optional<QCVerdict> qc;
  std::optional<FlowValues> flow;
  std::optional<Volume<std::uint8_t>> mask;
};

struct Agreement {
  std::vector<std::string> series_ids;
  std::vector<double> manual;     // truth
  std::vector<double> automatic;  // prediction
  std::optional<double> pearson;  // absent when degenerate
  std::optional<metrics::BlandAltman> bland_altman;
};

struct DiceSummary {
  std::size_t count = 0;
  double mean = 0.0;
};

struct Evaluation {
  std::size_t matched = 0;
  metrics::ConfusionMatrix view_matrix{kViewClasses};
  std::optional<metrics::MulticlassMetrics> view;
  metrics::ConfusionCounts qc_counts;  // positive class: artefact
  std::optional<metrics::ClassMetrics> qc;
  std::map<std::string, DiceSummary> dice;  // by truth vessel class, plus "all"
  // [parameter][vessel class or "all"]
  std::map<std::string, std::map<std::string, Agreement>> agreement;
};

// Every predicted id must exist in the truth set, and the sets must overlap;
// otherwise JoinError.
Evaluation evaluate(std::span<const PredictionRecord> predictions, std::span<const TruthRecord> truth);

// report.json (or a directory holding it) with masks resolved next to it;
// truth.json with masks resolved next to it.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& report);
std::vector<TruthRecord> read_truth(const std::filesystem::path& truth);

std::string evaluation_json(const Evaluation& evaluation);
std::string bland_altman_svg(const std::string& parameter, const Agreement& agreement);

// Writes evaluation.json and bland_altman_<param>.svg into out_dir.
Evaluation evaluate_files(const std::filesystem::path& report, const std::filesystem::path& truth,
                          const std::filesystem::path& out_dir);

}  // namespace pcflow
