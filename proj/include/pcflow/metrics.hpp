#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pcflow::metrics {

// 2|A n B| / (|A| + |B|); two empty masks agree perfectly (1.0).
double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

// Ratios with a zero denominator are reported as 0 with the matching flag set.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

ClassMetrics classification_metrics(const ConfusionCounts& counts);

// Square confusion matrix, rows = truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), cells_(classes * classes, 0) {}

  void add(std::size_t truth, std::size_t predicted);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return cells_[truth * classes_ + predicted]; }
  std::size_t classes() const { return classes_; }
  std::uint64_t total() const;

  // One-vs-rest counts for class k.
  ConfusionCounts counts(std::size_t k) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> cells_;
};

struct MulticlassMetrics {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;  // trace / total
};

MulticlassMetrics classification_metrics(const ConfusionMatrix& matrix);

double pearson(std::span<const double> x, std::span<const double> y);

struct BlandAltman {
  double bias = 0.0;
  double sd_diff = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
};

inline constexpr double kLimitsOfAgreementZ = 1.96;

// Differences are automatic - manual; the SD uses n - 1.
BlandAltman bland_altman(std::span<const double> manual, std::span<const double> automatic);

}  // namespace pcflow::metrics
