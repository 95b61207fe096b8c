// pcflow: command-line front end for the flow quantification pipeline.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/evaluate.hpp"
#include "pcflow/io.hpp"
#include "pcflow/phantom.hpp"
#include "pcflow/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pcflow;

namespace {

constexpr int kHardError = 2;

struct AnalyzeArgs {
  std::string study;
  std::string formula = "paper";
  double phase_range = 4096.0;
  std::string view_model, qc_model;
  bool skip_view = false, skip_qc = false;
  double qc_threshold = 0.5;
  std::string masks;
  bool propagate = false;
  std::string seed;
  double threshold_fraction = 0.5;
  int connectivity = 4;
  bool force = false;
  std::string out = "pcflow_out";
};

struct TrainArgs {
  std::string dataset;
  std::uint64_t seed = 0;
  std::size_t epochs = TrainConfig{}.epochs;
  std::size_t batch_size = TrainConfig{}.batch_size;
  double learning_rate = TrainConfig{}.learning_rate;
  double momentum = TrainConfig{}.momentum;
  bool no_augment = false;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  PipelineConfig config;
  config.velocity.formula = parse_velocity_formula(a.formula);
  config.velocity.phase_range = a.phase_range;
  if (!a.view_model.empty()) config.view_model = a.view_model;
  if (!a.qc_model.empty()) config.qc_model = a.qc_model;
  config.skip_view = a.skip_view;
  config.skip_qc = a.skip_qc;
  config.qc_threshold = a.qc_threshold;
  if (!a.masks.empty() && a.propagate) throw ConfigError("--masks and --propagate are mutually exclusive");
  if (!a.masks.empty()) config.masks = a.masks;
  if (a.propagate) {
    if (a.seed.empty()) throw ConfigError("--propagate needs --seed r,c,frame");
    config.seed = parse_seed_point(a.seed);
  } else if (!a.seed.empty()) {
    throw ConfigError("--seed is only used with --propagate");
  }
  config.propagation.threshold_fraction = a.threshold_fraction;
  if (a.connectivity != 4 && a.connectivity != 8) throw ConfigError("--connectivity must be 4 or 8");
  config.propagation.connectivity = a.connectivity == 8 ? Connectivity::kEight : Connectivity::kFour;
  config.force = a.force;

  const StudyReport report = run_pipeline(a.study, config);
  write_report(report, a.out);
  std::size_t analyzed = 0;
  for (const auto& s : report.series) analyzed += s.status == SeriesStatus::kAnalyzed;
  fmt::print("{} series, {} analyzed, {} skipped inputs -> {}\n", report.series.size(), analyzed, report.skipped.size(),
             (fs::path(a.out) / "report.json").string());
  return 0;
}

int run_train(const TrainArgs& a, TrainingTarget target) {
  const auto data = load_training_set(a.dataset, target);
  TrainConfig config;
  config.rng_seed = a.seed;
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  config.learning_rate = a.learning_rate;
  config.momentum = a.momentum;
  config.augment = !a.no_augment;
  if (target == TrainingTarget::kView) {
    config.loss = LossKind::kCrossEntropy;
    config.num_classes = kViewClasses;
  } else {
    config.loss = LossKind::kBinaryCrossEntropy;
  }
  AugmentationConfig aug;
  aug.rng_seed = a.seed;
  const auto result = train(data, config, aug);
  const std::string out = !a.out.empty() ? a.out : (target == TrainingTarget::kView ? "view.pcnn" : "qc.pcnn");
  result.model.save(out);
  fmt::print("trained on {} images, final loss {:.4f}, training accuracy {:.3f} -> {}\n", data.size(),
             result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), accuracy(result.model, data), out);
  return 0;
}

int run_phantom(const std::string& config_file, const std::string& out, bool dicom) {
  const auto bytes = io::read_file(config_file);
  PhantomBatch batch = parse_phantom_batch(std::string(bytes.begin(), bytes.end()));
  if (dicom) batch.export_options.dicom = true;
  std::vector<Phantom> phantoms;
  phantoms.reserve(batch.configs.size());
  for (const auto& c : batch.configs) phantoms.push_back(generate_phantom(c));
  export_phantoms(phantoms, out, batch.export_options);
  fmt::print("{} phantom series -> {}\n", phantoms.size(), out);
  return 0;
}

int run_evaluate(const std::string& pred, const std::string& truth, std::string out) {
  if (out.empty()) out = fs::is_directory(pred) ? pred : fs::path(pred).parent_path().string();
  if (out.empty()) out = ".";
  const Evaluation ev = evaluate_files(pred, truth, out);
  fmt::print("{} matched series -> {}\n", ev.matched, (fs::path(out) / "evaluation.json").string());
  return 0;
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("dataset", a.dataset, "Dataset directory (study/ and truth/truth.json)")->required();
  cmd->add_option("--seed", a.seed, "Random seed");
  cmd->add_option("--epochs", a.epochs, "Training epochs");
  cmd->add_option("--batch-size", a.batch_size, "Mini-batch size");
  cmd->add_option("--lr", a.learning_rate, "Learning rate");
  cmd->add_option("--momentum", a.momentum, "SGD momentum");
  cmd->add_flag("--no-augment", a.no_augment, "Disable data augmentation");
  cmd->add_option("--out", a.out, "Checkpoint file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-contrast flow quantification"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "Run the pipeline over a study directory");
  an->add_option("study", analyze.study, "Study directory")->required();
  an->add_option("--formula", analyze.formula, "Velocity formula: paper or conventional");
  an->add_option("--phase-range", analyze.phase_range, "Phase value mapping to VENC (conventional formula)");
  an->add_option("--view-model", analyze.view_model, "View classifier checkpoint");
  an->add_option("--qc-model", analyze.qc_model, "QC classifier checkpoint");
  an->add_flag("--skip-view", analyze.skip_view, "Disable view selection");
  an->add_flag("--skip-qc", analyze.skip_qc, "Disable learned QC");
  an->add_option("--qc-threshold", analyze.qc_threshold, "Artefact probability threshold");
  an->add_option("--masks", analyze.masks, "Mask file or directory of <series_id>.pcm");
  an->add_flag("--propagate", analyze.propagate, "Propagate a seed by region growing");
  an->add_option("--seed", analyze.seed, "Seed pixel as row,col,frame");
  an->add_option("--threshold-fraction", analyze.threshold_fraction, "Region-growing threshold fraction");
  an->add_option("--connectivity", analyze.connectivity, "Region-growing connectivity (4 or 8)");
  an->add_flag("--force", analyze.force, "Quantify series that fail QC");
  an->add_option("--out", analyze.out, "Output directory");

  TrainArgs train_view, train_qc;
  auto* tv = app.add_subcommand("train-view", "Train the view classifier");
  add_train_options(tv, train_view);
  auto* tq = app.add_subcommand("train-qc", "Train the QC classifier");
  add_train_options(tq, train_qc);

  std::string phantom_config, phantom_out;
  bool phantom_dicom = false;
  auto* ph = app.add_subcommand("phantom", "Generate phantom studies with ground truth");
  ph->add_option("config", phantom_config, "Phantom batch JSON")->required();
  ph->add_option("--out", phantom_out, "Output directory")->required();
  ph->add_flag("--dicom", phantom_dicom, "Also write the DICOM layout");

  std::string eval_pred, eval_truth, eval_out;
  auto* ev = app.add_subcommand("evaluate", "Compare a report against ground truth");
  ev->add_option("pred", eval_pred, "report.json or its directory")->required();
  ev->add_option("truth", eval_truth, "truth.json or its directory")->required();
  ev->add_option("--out", eval_out, "Output directory (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kHardError;
  }

  try {
    if (*an) return run_analyze(analyze);
    if (*tv) return run_train(train_view, TrainingTarget::kView);
    if (*tq) return run_train(train_qc, TrainingTarget::kQC);
    if (*ph) return run_phantom(phantom_config, phantom_out, phantom_dicom);
    if (*ev) return run_evaluate(eval_pred, eval_truth, eval_out);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kHardError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kHardError;
  }
  return kHardError;
}
