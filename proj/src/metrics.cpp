#include "pcflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcflow/error.hpp"

namespace pcflow::metrics {

double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw GeometryError(fmt::format("mask sizes differ: {} vs {}", a.size(), b.size()));
  std::uint64_t size_a = 0;
  std::uint64_t size_b = 0;
  std::uint64_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] != 0;
    const bool in_b = b[i] != 0;
    size_a += in_a;
    size_b += in_b;
    both += in_a && in_b;
  }
  if (size_a + size_b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(size_a + size_b);
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw EmptyInputError("confusion counts are all zero");
  ClassMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  m.f1_undefined = m.precision + m.recall == 0.0;
  m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= classes_ || predicted >= classes_) {
    throw GeometryError(fmt::format("class index ({}, {}) outside {} classes", truth, predicted, classes_));
  }
  ++cells_[truth * classes_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : cells_) t += v;
  return t;
}

ConfusionCounts ConfusionMatrix::counts(std::size_t k) const {
  ConfusionCounts c;
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t p = 0; p < classes_; ++p) {
      const auto v = at(t, p);
      if (t == k && p == k) {
        c.tp += v;
      } else if (p == k) {
        c.fp += v;
      } else if (t == k) {
        c.fn += v;
      } else {
        c.tn += v;
      }
    }
  }
  return c;
}

MulticlassMetrics classification_metrics(const ConfusionMatrix& matrix) {
  const auto total = matrix.total();
  if (total == 0) throw EmptyInputError("confusion matrix is empty");
  MulticlassMetrics out;
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < matrix.classes(); ++k) {
    out.per_class.push_back(classification_metrics(matrix.counts(k)));
    trace += matrix.at(k, k);
  }
  out.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw GeometryError(fmt::format("lengths differ: {} vs {}", x.size(), y.size()));
  if (x.size() < 2) throw DegenerateInputError("correlation needs at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("correlation of a constant vector is undefined");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

BlandAltman bland_altman(std::span<const double> manual, std::span<const double> automatic) {
  if (manual.size() != automatic.size()) {
    throw GeometryError(fmt::format("lengths differ: {} vs {}", manual.size(), automatic.size()));
  }
  if (manual.size() < 2) throw DegenerateInputError("Bland-Altman analysis needs at least two pairs");
  const double n = static_cast<double>(manual.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < manual.size(); ++i) mean += automatic[i] - manual[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < manual.size(); ++i) {
    const double d = (automatic[i] - manual[i]) - mean;
    ss += d * d;
  }
  BlandAltman ba;
  ba.bias = mean;
  ba.sd_diff = std::sqrt(ss / (n - 1.0));
  ba.loa_low = ba.bias - kLimitsOfAgreementZ * ba.sd_diff;
  ba.loa_high = ba.bias + kLimitsOfAgreementZ * ba.sd_diff;
  return ba;
}

}  // namespace pcflow::metrics
