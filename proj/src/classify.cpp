#include "pcflow/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"

namespace pcflow {

namespace {

constexpr std::size_t N = kClassifierSize;

}  // namespace

ClassifierInput preprocess(std::span<const double> frame, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || frame.size() != rows * cols) {
    throw GeometryError(fmt::format("frame of {} values does not match {}x{}", frame.size(), rows, cols));
  }
  // Source index = output index + offset; negative offsets pad.
  const std::ptrdiff_t off_r = (static_cast<std::ptrdiff_t>(rows) - static_cast<std::ptrdiff_t>(N)) / 2;
  const std::ptrdiff_t off_c = (static_cast<std::ptrdiff_t>(cols) - static_cast<std::ptrdiff_t>(N)) / 2;
  auto source = [&](std::size_t r, std::size_t c) -> const double* {
    const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) + off_r;
    const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c) + off_c;
    if (sr < 0 || sc < 0 || sr >= static_cast<std::ptrdiff_t>(rows) || sc >= static_cast<std::ptrdiff_t>(cols)) {
      return nullptr;
    }
    return &frame[static_cast<std::size_t>(sr) * cols + static_cast<std::size_t>(sc)];
  };

  double lo = INFINITY;
  double hi = -INFINITY;
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      if (const double* v = source(r, c)) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  ClassifierInput out;
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      if (const double* v = source(r, c)) out.at(r, c) = (*v - lo) / range;
    }
  }
  return out;
}

ClassifierInput flip(const ClassifierInput& input, FlipAxis axis) {
  ClassifierInput out;
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      out.at(r, c) = axis == FlipAxis::kHorizontal ? input.at(r, N - 1 - c) : input.at(N - 1 - r, c);
    }
  }
  return out;
}

ClassifierInput augment(const ClassifierInput& input, const AugmentationConfig& config, Rng& rng) {
  // Every parameter is drawn whether or not its transform fires, so the
  // stream layout is fixed.
  const bool do_flip = rng.bernoulli(config.flip_probability);
  const bool vertical = rng.bernoulli(0.5);
  const bool do_shift = rng.bernoulli(config.per_transform_probability);
  const double tx = rng.uniform(-config.max_translation_px, config.max_translation_px);
  const double ty = rng.uniform(-config.max_translation_px, config.max_translation_px);
  const bool do_rotate = rng.bernoulli(config.per_transform_probability);
  const double angle = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) * std::numbers::pi / 180.0;
  const bool do_scale = rng.bernoulli(config.per_transform_probability);
  const double scale = rng.uniform(1.0 - config.max_scale_fraction, 1.0 + config.max_scale_fraction);

  ClassifierInput current = do_flip ? flip(input, vertical ? FlipAxis::kVertical : FlipAxis::kHorizontal) : input;
  if (!do_shift && !do_rotate && !do_scale) return current;

  const double shift_x = do_shift ? tx : 0.0;
  const double shift_y = do_shift ? ty : 0.0;
  const double theta = do_rotate ? angle : 0.0;
  const double s = do_scale ? scale : 1.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double centre = (static_cast<double>(N) - 1.0) / 2.0;

  ClassifierInput out;
  auto sample = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(N) || c >= static_cast<std::ptrdiff_t>(N)) return 0.0;
    return current.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      // Inverse map: undo translation, rotation, then scale about the centre.
      const double x = static_cast<double>(c) - centre - shift_x;
      const double y = static_cast<double>(r) - centre - shift_y;
      const double sx = (cos_t * x + sin_t * y) / s + centre;
      const double sy = (-sin_t * x + cos_t * y) / s + centre;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double wx = sx - fx;
      const double wy = sy - fy;
      const auto x0 = static_cast<std::ptrdiff_t>(fx);
      const auto y0 = static_cast<std::ptrdiff_t>(fy);
      out.at(r, c) = (1.0 - wy) * ((1.0 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                     wy * ((1.0 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
    }
  }
  return out;
}

std::string_view to_string(ViewLabel label) {
  switch (label) {
    case ViewLabel::kAscendingAorta:
      return "ascending_aorta";
    case ViewLabel::kPulmonaryArtery:
      return "pulmonary_artery";
    case ViewLabel::kOther:
      return "other";
  }
  return "unknown";
}

ViewLabel parse_view_label(std::string_view text) {
  for (auto v : {ViewLabel::kAscendingAorta, ViewLabel::kPulmonaryArtery, ViewLabel::kOther}) {
    if (text == to_string(v)) return v;
  }
  throw FormatError(fmt::format("unknown view label '{}'", text));
}

std::string_view to_string(QCVerdict verdict) { return verdict == QCVerdict::kPass ? "pass" : "artefact"; }

QCVerdict parse_qc_verdict(std::string_view text) {
  if (text == "pass") return QCVerdict::kPass;
  if (text == "artefact") return QCVerdict::kArtefact;
  throw FormatError(fmt::format("unknown QC verdict '{}'", text));
}

// ---------------------------------------------------------------------------
// Model

ClassifierModel::ClassifierModel(nn::Network network, nn::Head head, std::size_t num_classes)
    : network_(std::move(network)), head_(head), num_classes_(num_classes) {
  const std::size_t outputs = network_.output_shape().size();
  const std::size_t expected = head_ == nn::Head::kSigmoid ? 1 : num_classes_;
  if (num_classes_ < 2 || outputs != expected || (head_ == nn::Head::kSigmoid && num_classes_ != 2)) {
    throw ConfigError(fmt::format("network with {} outputs cannot serve {} classes", outputs, num_classes_));
  }
}

ClassifierModel ClassifierModel::make(std::size_t num_classes, LossKind loss, std::uint64_t seed) {
  const bool binary = loss == LossKind::kBinaryCrossEntropy;
  if (binary && num_classes != 2) throw ConfigError("binary cross-entropy needs exactly two classes");
  std::vector<std::unique_ptr<nn::Layer>> layers;
  layers.push_back(std::make_unique<nn::AvgPool>(2));
  layers.push_back(std::make_unique<nn::Conv2d>(1, 4));
  layers.push_back(std::make_unique<nn::Relu>());
  layers.push_back(std::make_unique<nn::MaxPool>(2));
  layers.push_back(std::make_unique<nn::Conv2d>(4, 8));
  layers.push_back(std::make_unique<nn::Relu>());
  layers.push_back(std::make_unique<nn::MaxPool>(2));
  layers.push_back(std::make_unique<nn::Conv2d>(8, 8));
  layers.push_back(std::make_unique<nn::Relu>());
  layers.push_back(std::make_unique<nn::MaxPool>(2));
  layers.push_back(std::make_unique<nn::Dense>(8 * 12 * 12, binary ? 1 : num_classes));
  nn::Network net({1, N, N}, std::move(layers));
  net.initialize(seed);
  return ClassifierModel(std::move(net), binary ? nn::Head::kSigmoid : nn::Head::kSoftmax, num_classes);
}

namespace {

nn::Tensor to_tensor(const ClassifierInput& input) {
  if (input.pixels.size() != N * N) {
    throw GeometryError(fmt::format("classifier input has {} pixels, expected {}", input.pixels.size(), N * N));
  }
  nn::Tensor t;
  t.shape = {1, N, N};
  t.data = input.pixels;
  return t;
}

constexpr std::string_view kModelMagic = "PCNN";
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

std::vector<double> ClassifierModel::probabilities(const ClassifierInput& input) const {
  nn::Workspace ws;
  auto logits = network_.forward(to_tensor(input), ws);
  return nn::class_probabilities(head_, logits);
}

std::vector<std::uint8_t> ClassifierModel::encode() const {
  io::ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(head_));
  w.u32(static_cast<std::uint32_t>(num_classes_));
  const auto& in = network_.input_shape();
  w.u32(static_cast<std::uint32_t>(in.channels));
  w.u32(static_cast<std::uint32_t>(in.height));
  w.u32(static_cast<std::uint32_t>(in.width));
  w.u32(static_cast<std::uint32_t>(network_.layer_count()));
  for (std::size_t i = 0; i < network_.layer_count(); ++i) {
    const auto& layer = network_.layer(i);
    w.u32(static_cast<std::uint32_t>(layer.kind()));
    const auto cfg = layer.config();
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    for (auto v : cfg) w.u32(v);
    w.u64(layer.params().size());
    for (double p : layer.params()) w.f64(p);
  }
  return std::move(w.bytes());
}

ClassifierModel ClassifierModel::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kModelMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kModelMagic.size()) != kModelMagic) {
    throw FormatError("not a model checkpoint");
  }
  io::ByteReader r(bytes.subspan(kModelMagic.size()));
  if (const auto version = r.u32(); version != kModelVersion) {
    throw FormatError(fmt::format("unsupported checkpoint version {}", version));
  }
  const auto head = static_cast<nn::Head>(r.u32());
  if (head != nn::Head::kSoftmax && head != nn::Head::kSigmoid) throw FormatError("unknown classifier head");
  const std::size_t classes = r.u32();
  nn::Shape input;
  input.channels = r.u32();
  input.height = r.u32();
  input.width = r.u32();
  const std::uint32_t count = r.u32();
  std::vector<std::unique_ptr<nn::Layer>> layers;
  std::vector<std::vector<double>> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = static_cast<nn::LayerKind>(r.u32());
    std::vector<std::uint32_t> cfg(r.u32());
    if (cfg.size() > 16) throw FormatError("implausible layer configuration");
    for (auto& v : cfg) v = r.u32();
    auto layer = nn::make_layer(kind, cfg);
    const std::uint64_t n = r.u64();
    if (n != layer->params().size()) {
      throw FormatError(fmt::format("layer {} stores {} parameters, expected {}", i, n, layer->params().size()));
    }
    for (double& p : layer->params()) p = r.f64();
    layers.push_back(std::move(layer));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  try {
    return ClassifierModel(nn::Network(input, std::move(layers)), head, classes);
  } catch (const GeometryError& e) {
    throw FormatError(fmt::format("checkpoint layers are inconsistent: {}", e.what()));
  }
}

void ClassifierModel::save(const std::filesystem::path& file) const { io::write_file_atomic(file, encode()); }

ClassifierModel ClassifierModel::load(const std::filesystem::path& file) { return decode(io::read_file(file)); }

// ---------------------------------------------------------------------------
// Training

TrainResult train(std::span<const LabeledImage> dataset, const TrainConfig& config, const AugmentationConfig& aug) {
  if (dataset.empty()) throw DegenerateDatasetError("training set is empty");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  std::set<std::size_t> labels;
  for (const auto& s : dataset) labels.insert(s.label);
  if (labels.size() < 2) throw DegenerateDatasetError("training set contains a single class");
  std::size_t classes = config.num_classes != 0 ? config.num_classes : *labels.rbegin() + 1;
  if (config.loss == LossKind::kBinaryCrossEntropy) classes = 2;
  if (*labels.rbegin() >= classes) {
    throw ConfigError(fmt::format("label {} outside the {} model classes", *labels.rbegin(), classes));
  }

  TrainResult result;
  result.model = ClassifierModel::make(classes, config.loss, mix_seed(config.rng_seed, 1));
  auto& net = result.model.network();
  const nn::Head head = result.model.head();
  const std::size_t n_params = net.parameter_count();
  const std::size_t batch = config.batch_size;

  std::vector<nn::Workspace> workspaces(batch);
  std::vector<std::vector<double>> sample_grads(batch, std::vector<double>(n_params));
  std::vector<double> sample_loss(batch);
  std::vector<double> grad(n_params);
  std::vector<double> velocity(n_params, 0.0);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(config.rng_seed, 2));

  auto run_sample = [&](std::size_t epoch, std::size_t position, std::size_t slot) {
    const LabeledImage& sample = dataset[order[position]];
    Rng rng(mix_seed(config.rng_seed ^ aug.rng_seed, epoch + 3, position));
    const ClassifierInput input = config.augment ? augment(sample.image, aug, rng) : sample.image;
    auto& g = sample_grads[slot];
    std::fill(g.begin(), g.end(), 0.0);
    auto logits = net.forward(to_tensor(input), workspaces[slot]);
    std::vector<double> dlogits(logits.size());
    sample_loss[slot] = nn::loss_and_gradient(head, logits, sample.label, dlogits);
    net.backward(workspaces[slot], dlogits, g);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      if (config.parallel) {
        const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < n; ++k) run_sample(epoch, start + k, static_cast<std::size_t>(k));
      } else {
        for (std::size_t k = 0; k < count; ++k) run_sample(epoch, start + k, k);
      }
      // Fixed-order reduction keeps training independent of the thread count.
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += sample_grads[k][i];
        epoch_loss += sample_loss[k];
      }
      const double inv = 1.0 / static_cast<double>(count);
      auto params = net.flat_parameters();
      for (std::size_t i = 0; i < n_params; ++i) {
        velocity[i] = config.momentum * velocity[i] + grad[i] * inv;
        params[i] -= config.learning_rate * velocity[i];
      }
      net.set_flat_parameters(params);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ViewPrediction predict_view(const ClassifierModel& model, const ClassifierInput& input) {
  if (model.num_classes() != kViewClasses || model.head() != nn::Head::kSoftmax) {
    throw ConfigError(fmt::format("view selection needs a 3-class model, got {} classes", model.num_classes()));
  }
  const auto p = model.probabilities(input);
  ViewPrediction out;
  std::copy(p.begin(), p.end(), out.probabilities.begin());
  out.label = static_cast<ViewLabel>(argmax(p));
  return out;
}

QCLabel qc_label_from_score(double score, double threshold) {
  return {score >= threshold ? QCVerdict::kArtefact : QCVerdict::kPass, score};
}

QCLabel predict_qc(const ClassifierModel& model, const ClassifierInput& input, double threshold) {
  if (model.num_classes() != 2) {
    throw ConfigError(fmt::format("quality control needs a 2-class model, got {} classes", model.num_classes()));
  }
  return qc_label_from_score(model.probabilities(input)[1], threshold);
}

double accuracy(const ClassifierModel& model, std::span<const LabeledImage> dataset) {
  if (dataset.empty()) throw EmptyInputError("no samples to score");
  std::size_t hits = 0;
  for (const auto& s : dataset) hits += argmax(model.probabilities(s.image)) == s.label;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

ClassifierInput view_input(const PhaseContrastSeries& series) {
  validate(series);
  return preprocess_frame(series.magnitude.frame(0), series.meta.rows, series.meta.cols);
}

ClassifierInput qc_input(const PhaseContrastSeries& series) {
  validate(series);
  std::size_t best = 0;
  std::int64_t best_sum = -1;
  for (std::size_t f = 0; f < series.meta.num_frames; ++f) {
    std::int64_t sum = 0;
    for (std::int16_t v : series.phase.frame(f)) sum += std::abs(static_cast<std::int64_t>(v));
    if (sum > best_sum) {
      best_sum = sum;
      best = f;
    }
  }
  return preprocess_frame(series.phase.frame(best), series.meta.rows, series.meta.cols);
}

std::string file_checksum(const std::filesystem::path& file) {
  const auto bytes = io::read_file(file);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace pcflow
