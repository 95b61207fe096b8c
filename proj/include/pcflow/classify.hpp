#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcflow/nn/network.hpp"
#include "pcflow/rng.hpp"
#include "pcflow/series.hpp"

namespace pcflow {

inline constexpr std::size_t kClassifierSize = 192;

// 192x192 image, intensities in [0, 1].
struct ClassifierInput {
  std::vector<double> pixels = std::vector<double>(kClassifierSize * kClassifierSize, 0.0);

  double& at(std::size_t r, std::size_t c) { return pixels[r * kClassifierSize + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * kClassifierSize + c]; }
  friend bool operator==(const ClassifierInput&, const ClassifierInput&) = default;
};

// Centre crop (or symmetric zero pad) to 192x192, then per-image min-max
// scaling of the original pixels to [0, 1]; padding stays 0 and a constant
// image maps to all zeros.
ClassifierInput preprocess(std::span<const double> frame, std::size_t rows, std::size_t cols);

template <typename T>
ClassifierInput preprocess_frame(std::span<const T> frame, std::size_t rows, std::size_t cols) {
  std::vector<double> widened(frame.begin(), frame.end());
  return preprocess(widened, rows, cols);
}

struct AugmentationConfig {
  double max_translation_px = 30.0;
  double max_rotation_deg = 90.0;
  double flip_probability = 0.5;
  double max_scale_fraction = 0.20;
  double per_transform_probability = 0.5;
  std::uint64_t rng_seed = 0;
};

enum class FlipAxis { kHorizontal, kVertical };

ClassifierInput flip(const ClassifierInput& input, FlipAxis axis);

// Flip (exact index reversal) followed by one bilinear resampling for the
// translation/rotation/scale draws, zero fill outside the source. Each
// transform fires independently with its configured probability.
ClassifierInput augment(const ClassifierInput& input, const AugmentationConfig& config, Rng& rng);

enum class ViewLabel : std::uint32_t { kAscendingAorta = 0, kPulmonaryArtery = 1, kOther = 2 };
inline constexpr std::size_t kViewClasses = 3;

std::string_view to_string(ViewLabel label);
ViewLabel parse_view_label(std::string_view text);

enum class QCVerdict : std::uint32_t { kPass = 0, kArtefact = 1 };

std::string_view to_string(QCVerdict verdict);
QCVerdict parse_qc_verdict(std::string_view text);

struct QCLabel {
  QCVerdict label = QCVerdict::kPass;
  double score = 0.0;  // artefact probability
};

enum class LossKind { kCrossEntropy, kBinaryCrossEntropy };

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  std::size_t epochs = 50;
  double momentum = 0.99;
  LossKind loss = LossKind::kCrossEntropy;
  std::size_t num_classes = 0;  // 0: one more than the largest label
  std::uint64_t rng_seed = 0;
  bool augment = true;
  // Per-sample work inside a batch runs on OpenMP threads; gradients are
  // reduced in sample order so results do not depend on the thread count.
  bool parallel = true;
};

struct LabeledImage {
  ClassifierInput image;
  std::size_t label = 0;
};

class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(nn::Network network, nn::Head head, std::size_t num_classes);

  // Small CNN shared by the view and QC stages: 2x2 average pool, three
  // conv3x3/ReLU/max-pool blocks (4, 8, 8 channels), dense head.
  static ClassifierModel make(std::size_t num_classes, LossKind loss, std::uint64_t seed);

  std::vector<double> probabilities(const ClassifierInput& input) const;

  const nn::Network& network() const { return network_; }
  nn::Network& network() { return network_; }
  nn::Head head() const { return head_; }
  std::size_t num_classes() const { return num_classes_; }

  std::vector<std::uint8_t> encode() const;
  static ClassifierModel decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& file) const;
  static ClassifierModel load(const std::filesystem::path& file);

 private:
  nn::Network network_;
  nn::Head head_ = nn::Head::kSoftmax;
  std::size_t num_classes_ = 0;
};

struct TrainResult {
  ClassifierModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

TrainResult train(std::span<const LabeledImage> dataset, const TrainConfig& config, const AugmentationConfig& aug);

struct ViewPrediction {
  ViewLabel label = ViewLabel::kAscendingAorta;
  std::array<double, kViewClasses> probabilities{};
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

ViewPrediction predict_view(const ClassifierModel& model, const ClassifierInput& input);
QCLabel predict_qc(const ClassifierModel& model, const ClassifierInput& input, double threshold = 0.5);
QCLabel qc_label_from_score(double score, double threshold = 0.5);

double accuracy(const ClassifierModel& model, std::span<const LabeledImage> dataset);

// Classifier inputs derived from a series: the first magnitude frame for view
// selection, the phase frame with the largest summed |P| for quality control.
ClassifierInput view_input(const PhaseContrastSeries& series);
ClassifierInput qc_input(const PhaseContrastSeries& series);

// FNV-1a 64 of the file contents, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& file);

}  // namespace pcflow
