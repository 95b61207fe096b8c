#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"
#include "pcflow/pipeline.hpp"
#include "pcflow/svg.hpp"

namespace pcflow {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json view_json(const ViewPrediction& v) {
  Json probs;
  for (std::size_t k = 0; k < kViewClasses; ++k) probs[std::string(to_string(static_cast<ViewLabel>(k)))] = v.probabilities[k];
  return Json{{"label", to_string(v.label)}, {"probabilities", probs}};
}

Json qc_json(const SeriesReport& s) {
  Json out;
  out["learned"] = s.learned_qc ? Json{{"label", to_string(s.learned_qc->label)}, {"score", s.learned_qc->score}} : Json();
  if (s.rule_qc) {
    out["rules"] = Json{{"aliasing_flag", s.rule_qc->aliasing_flag},
                        {"aliasing_fraction", s.rule_qc->aliasing_fraction},
                        {"curve_plausible", s.rule_qc->curve_plausible},
                        {"notes", s.rule_qc->notes},
                        {"passed", s.rule_qc->passed()}};
  } else {
    out["rules"] = Json();
  }
  return out;
}

// Combined verdict for the CSV: artefact if any QC stage objected.
std::string qc_column(const SeriesReport& s) {
  const bool learned_bad = s.learned_qc && s.learned_qc->label == QCVerdict::kArtefact;
  const bool rules_bad = s.rule_qc && !s.rule_qc->passed();
  if (learned_bad || rules_bad) return "artefact";
  if (s.learned_qc || s.rule_qc) return "pass";
  return "";
}

std::string mask_path(const SeriesReport& s) { return "masks/" + s.series_id + ".pcm"; }

}  // namespace

std::string report_json(const StudyReport& report) {
  const auto& p = report.provenance;
  Json prov;
  prov["formula"] = to_string(p.formula);
  prov["phase_range"] = p.phase_range;
  prov["segmentation"] = p.segmentation;
  prov["threshold_fraction"] = p.threshold_fraction;
  prov["connectivity"] = static_cast<int>(p.connectivity);
  prov["qc_threshold"] = p.qc_threshold;
  prov["aliasing_saturation_fraction"] = p.aliasing_saturation;
  prov["aliasing_flag_threshold"] = p.aliasing_flag_threshold;
  prov["closing_fraction"] = p.closing_fraction;
  prov["spike_factor"] = p.spike_factor;
  prov["force"] = p.force;
  prov["view_model_checksum"] = p.view_model_checksum ? Json(*p.view_model_checksum) : Json();
  prov["qc_model_checksum"] = p.qc_model_checksum ? Json(*p.qc_model_checksum) : Json();

  Json series = Json::array();
  for (const auto& s : report.series) {
    Json e;
    e["series_id"] = s.series_id;
    e["source"] = s.source;
    e["status"] = to_string(s.status);
    if (!s.reason.empty()) e["reason"] = s.reason;
    e["view"] = s.view ? view_json(*s.view) : Json();
    e["qc"] = qc_json(s);
    if (s.mask) {
      Json warnings = Json::array();
      for (const auto& w : s.warnings) warnings.push_back(Json{{"frame", w.frame}, {"message", w.message}});
      e["segmentation"] = Json{{"source", to_string(s.mask->source)}, {"mask_file", mask_path(s)}, {"warnings", warnings}};
    } else {
      e["segmentation"] = Json();
    }
    if (s.status == SeriesStatus::kAnalyzed && s.flow && s.curve) {
      e["flow"] = Json{{"peak_ml_s", s.flow->peak_flow_ml_s},
                       {"net_ml", s.flow->net_flow_ml},
                       {"forward_ml", s.flow->forward_flow_ml},
                       {"backward_ml", s.flow->backward_flow_ml},
                       {"backward_ml_abs", std::abs(s.flow->backward_flow_ml)},
                       {"frame_interval_s", s.curve->frame_interval_s},
                       {"rates_ml_s", s.curve->rates_ml_s}};
    }
    series.push_back(std::move(e));
  }
  Json skipped = Json::array();
  for (const auto& k : report.skipped) skipped.push_back(Json{{"source", k.source}, {"error", k.error}});

  Json doc;
  doc["provenance"] = std::move(prov);
  doc["series"] = std::move(series);
  doc["skipped"] = std::move(skipped);
  return doc.dump(2) + "\n";
}

std::string report_csv(const StudyReport& report) {
  std::string out = "series_id,status,view,qc,peak_ml_s,net_ml,forward_ml,backward_ml_abs\n";
  for (const auto& s : report.series) {
    const std::string view = s.view ? std::string(to_string(s.view->label)) : "";
    out += fmt::format("{},{},{},{}", s.series_id, to_string(s.status), view, qc_column(s));
    if (s.status == SeriesStatus::kAnalyzed && s.flow) {
      out += fmt::format(",{},{},{},{}\n", io::format_double(s.flow->peak_flow_ml_s), io::format_double(s.flow->net_flow_ml),
                         io::format_double(s.flow->forward_flow_ml), io::format_double(std::abs(s.flow->backward_flow_ml)));
    } else {
      out += ",,,,\n";
    }
  }
  return out;
}

std::string flow_curve_svg(const std::string& title, const FlowCurve& curve) {
  svg::Plot plot(title, "time (s)", "flow (ml/s)");
  std::vector<svg::Point> points;
  for (std::size_t i = 0; i < curve.rates_ml_s.size(); ++i)
    points.push_back({static_cast<double>(i) * curve.frame_interval_s, curve.rates_ml_s[i]});
  plot.add_horizontal(0.0, "#999999");
  plot.add_polyline(points, "#c0392b");
  return plot.render();
}

void write_report(const StudyReport& report, const fs::path& out_dir) {
  try {
    fs::create_directories(out_dir / "curves");
    fs::create_directories(out_dir / "masks");
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
  for (const auto& s : report.series) {
    if (s.mask) write_mask_file(out_dir / mask_path(s), s.mask->mask);
    if (s.status == SeriesStatus::kAnalyzed && s.curve)
      io::write_file_atomic(out_dir / "curves" / (s.series_id + ".svg"), flow_curve_svg(s.series_id, *s.curve));
  }
  io::write_file_atomic(out_dir / "report.csv", report_csv(report));
  io::write_file_atomic(out_dir / "report.json", report_json(report));
}

}  // namespace pcflow
