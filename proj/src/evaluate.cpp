#include "pcflow/evaluate.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"
#include "pcflow/segment.hpp"
#include "pcflow/svg.hpp"

namespace pcflow {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kAllVessels = "all";

Json parse_json_file(const fs::path& file) {
  const auto bytes = io::read_file(file);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw FormatError(fmt::format("'{}': {}", file.string(), e.what()));
  }
}

template <typename T>
T field(const Json& j, const char* key, const fs::path& file) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(fmt::format("'{}': field '{}': {}", file.string(), key, e.what()));
  }
}

std::optional<Volume<std::uint8_t>> load_mask(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  return decode_mask(io::read_file(file));
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

Json class_metrics_json(const metrics::ClassMetrics& m) {
  return Json{{"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"accuracy", m.accuracy},
              {"precision_undefined", m.precision_undefined},
              {"recall_undefined", m.recall_undefined},
              {"f1_undefined", m.f1_undefined}};
}

}  // namespace

Evaluation evaluate(std::span<const PredictionRecord> predictions, std::span<const TruthRecord> truth) {
  std::map<std::string, const TruthRecord*> by_id;
  for (const auto& t : truth)
    if (!by_id.emplace(t.series_id, &t).second) throw JoinError(fmt::format("duplicate truth id '{}'", t.series_id));
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!by_id.count(p.series_id)) throw JoinError(fmt::format("predicted series '{}' has no ground truth", p.series_id));
    if (!seen.insert(p.series_id).second) throw JoinError(fmt::format("duplicate prediction id '{}'", p.series_id));
  }
  if (predictions.empty()) throw JoinError("no predictions to match against ground truth");

  Evaluation ev;
  ev.matched = predictions.size();
  std::map<std::string, std::pair<std::size_t, double>> dice_sums;
  for (const auto& p : predictions) {
    const TruthRecord& t = *by_id.at(p.series_id);
    const std::string vessel(to_string(t.view));
    if (p.view) ev.view_matrix.add(static_cast<std::size_t>(t.view), static_cast<std::size_t>(*p.view));
    if (p.qc) {
      const bool truth_pos = t.qc == QCVerdict::kArtefact;
      const bool pred_pos = *p.qc == QCVerdict::kArtefact;
      if (truth_pos && pred_pos) ++ev.qc_counts.tp;
      else if (!truth_pos && pred_pos) ++ev.qc_counts.fp;
      else if (truth_pos && !pred_pos) ++ev.qc_counts.fn;
      else ++ev.qc_counts.tn;
    }
    if (p.mask && t.mask) {
      const double d = metrics::dice(p.mask->data(), t.mask->data());
      for (const auto& key : {vessel, std::string(kAllVessels)}) {
        dice_sums[key].first += 1;
        dice_sums[key].second += d;
      }
    }
    if (p.flow && t.flow) {
      for (std::size_t k = 0; k < kFlowParameterCount; ++k) {
        for (const auto& key : {vessel, std::string(kAllVessels)}) {
          auto& a = ev.agreement[kFlowParameterNames[k]][key];
          a.series_ids.push_back(p.series_id);
          a.manual.push_back((*t.flow)[k]);
          a.automatic.push_back((*p.flow)[k]);
        }
      }
    }
  }
  if (ev.view_matrix.total() > 0) ev.view = metrics::classification_metrics(ev.view_matrix);
  if (ev.qc_counts.total() > 0) ev.qc = metrics::classification_metrics(ev.qc_counts);
  for (const auto& [key, sum] : dice_sums) ev.dice[key] = {sum.first, sum.second / static_cast<double>(sum.first)};
  for (auto& [param, groups] : ev.agreement) {
    for (auto& [key, a] : groups) {
      try {
        a.pearson = metrics::pearson(a.manual, a.automatic);
      } catch (const DegenerateInputError&) {
      }
      try {
        a.bland_altman = metrics::bland_altman(a.manual, a.automatic);
      } catch (const DegenerateInputError&) {
      }
    }
  }
  return ev;
}

std::vector<PredictionRecord> read_predictions(const fs::path& report) {
  const fs::path file = fs::is_directory(report) ? report / "report.json" : report;
  const fs::path base = file.parent_path();
  const Json doc = parse_json_file(file);
  if (!doc.contains("series") || !doc["series"].is_array()) throw FormatError(fmt::format("'{}': no series array", file.string()));
  std::vector<PredictionRecord> out;
  for (const auto& s : doc["series"]) {
    PredictionRecord p;
    p.series_id = field<std::string>(s, "series_id", file);
    if (s.contains("view") && s["view"].is_object()) p.view = parse_view_label(field<std::string>(s["view"], "label", file));
    if (s.contains("qc") && s["qc"].is_object()) {
      const auto& qc = s["qc"];
      const bool learned_bad = qc.contains("learned") && qc["learned"].is_object() &&
                               parse_qc_verdict(field<std::string>(qc["learned"], "label", file)) == QCVerdict::kArtefact;
      if (qc.contains("learned") && qc["learned"].is_object()) p.qc = learned_bad ? QCVerdict::kArtefact : QCVerdict::kPass;
    }
    if (s.contains("segmentation") && s["segmentation"].is_object())
      p.mask = load_mask(base / field<std::string>(s["segmentation"], "mask_file", file));
    if (s.contains("flow") && s["flow"].is_object()) {
      FlowValues v{};
      for (std::size_t k = 0; k < kFlowParameterCount; ++k) v[k] = field<double>(s["flow"], kFlowParameterNames[k], file);
      p.flow = v;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<TruthRecord> read_truth(const fs::path& truth) {
  const fs::path file = fs::is_directory(truth) ? truth / "truth.json" : truth;
  const fs::path base = file.parent_path();
  const Json doc = parse_json_file(file);
  if (!doc.contains("series") || !doc["series"].is_array()) throw FormatError(fmt::format("'{}': no series array", file.string()));
  std::vector<TruthRecord> out;
  for (const auto& s : doc["series"]) {
    TruthRecord t;
    t.series_id = field<std::string>(s, "series_id", file);
    t.view = parse_view_label(field<std::string>(s, "view", file));
    t.qc = parse_qc_verdict(field<std::string>(s, "qc", file));
    if (s.contains(kFlowParameterNames[0])) {
      FlowValues v{};
      for (std::size_t k = 0; k < kFlowParameterCount; ++k) v[k] = field<double>(s, kFlowParameterNames[k], file);
      t.flow = v;
    }
    if (s.contains("mask_file")) t.mask = load_mask(base / field<std::string>(s, "mask_file", file));
    out.push_back(std::move(t));
  }
  return out;
}

std::string evaluation_json(const Evaluation& ev) {
  Json doc;
  doc["matched_series"] = ev.matched;

  Json view;
  if (ev.view) {
    Json matrix = Json::array();
    for (std::size_t t = 0; t < kViewClasses; ++t) {
      Json row = Json::array();
      for (std::size_t p = 0; p < kViewClasses; ++p) row.push_back(ev.view_matrix.at(t, p));
      matrix.push_back(row);
    }
    Json per_class;
    for (std::size_t k = 0; k < kViewClasses; ++k)
      per_class[std::string(to_string(static_cast<ViewLabel>(k)))] = class_metrics_json(ev.view->per_class[k]);
    view = Json{{"count", ev.view_matrix.total()}, {"accuracy", ev.view->accuracy}, {"confusion", matrix}, {"per_class", per_class}};
  }
  doc["view_selection"] = view;

  Json qc;
  if (ev.qc) {
    qc = class_metrics_json(*ev.qc);
    qc["count"] = ev.qc_counts.total();
    qc["confusion"] = Json{{"tp", ev.qc_counts.tp}, {"fp", ev.qc_counts.fp}, {"fn", ev.qc_counts.fn}, {"tn", ev.qc_counts.tn}};
  }
  doc["quality_control"] = qc;

  Json dice = Json::object();
  for (const auto& [key, d] : ev.dice) dice[key] = Json{{"count", d.count}, {"mean", d.mean}};
  doc["dice"] = dice;

  Json flow = Json::object();
  for (const char* param : kFlowParameterNames) {
    auto it = ev.agreement.find(param);
    if (it == ev.agreement.end()) continue;
    Json groups;
    for (const auto& [key, a] : it->second) {
      Json g;
      g["count"] = a.manual.size();
      g["pearson"] = optional_number(a.pearson);
      if (a.bland_altman) {
        g["bland_altman"] = Json{{"bias", a.bland_altman->bias},
                                 {"sd_diff", a.bland_altman->sd_diff},
                                 {"loa_low", a.bland_altman->loa_low},
                                 {"loa_high", a.bland_altman->loa_high}};
      } else {
        g["bland_altman"] = Json();
      }
      groups[key] = std::move(g);
    }
    flow[param] = std::move(groups);
  }
  doc["flow_agreement"] = flow;
  return doc.dump(2) + "\n";
}

std::string bland_altman_svg(const std::string& parameter, const Agreement& a) {
  svg::Plot plot("Bland-Altman: " + parameter, "mean of truth and pipeline", "pipeline - truth");
  std::vector<svg::Point> points;
  for (std::size_t i = 0; i < a.manual.size(); ++i)
    points.push_back({0.5 * (a.manual[i] + a.automatic[i]), a.automatic[i] - a.manual[i]});
  if (a.bland_altman) {
    plot.add_horizontal(a.bland_altman->bias, "#2c3e50", fmt::format("bias {:.4g}", a.bland_altman->bias));
    plot.add_horizontal(a.bland_altman->loa_low, "#c0392b", fmt::format("-1.96 SD {:.4g}", a.bland_altman->loa_low));
    plot.add_horizontal(a.bland_altman->loa_high, "#c0392b", fmt::format("+1.96 SD {:.4g}", a.bland_altman->loa_high));
  }
  plot.add_scatter(points, "#2980b9");
  return plot.render();
}

Evaluation evaluate_files(const fs::path& report, const fs::path& truth, const fs::path& out_dir) {
  const auto predictions = read_predictions(report);
  const auto truths = read_truth(truth);
  Evaluation ev = evaluate(predictions, truths);
  try {
    fs::create_directories(out_dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
  io::write_file_atomic(out_dir / "evaluation.json", evaluation_json(ev));
  for (const auto& [param, groups] : ev.agreement) {
    auto it = groups.find(kAllVessels);
    if (it != groups.end()) io::write_file_atomic(out_dir / fmt::format("bland_altman_{}.svg", param), bland_altman_svg(param, it->second));
  }
  return ev;
}

}  // namespace pcflow
