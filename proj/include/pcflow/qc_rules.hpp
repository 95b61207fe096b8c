#pragma once

#include <string>
#include <vector>

#include "pcflow/flow.hpp"
#include "pcflow/segment.hpp"
#include "pcflow/velocity.hpp"

namespace pcflow {

struct AliasingResult {
  bool flagged = false;
  double fraction = 0.0;  // of in-mask pixels, over all frames
};

struct AliasingOptions {
  double saturation_fraction = 0.95;
  double flag_threshold = 0.02;
};

AliasingResult detect_aliasing(const VelocityMap& velocity, const SegmentationMask& mask,
                               const AliasingOptions& options = {});

struct PlausibilityOptions {
  double closing_fraction = 0.25;  // of the peak-to-trough range
  double spike_factor = 3.0;
};

struct PlausibilityResult {
  bool plausible = true;
  std::vector<std::string> notes;
};

PlausibilityResult check_curve_plausibility(const FlowCurve& curve, const PlausibilityOptions& options = {});

struct QCReport {
  bool aliasing_flag = false;
  double aliasing_fraction = 0.0;
  bool curve_plausible = true;
  std::vector<std::string> notes;

  bool passed() const { return !aliasing_flag && curve_plausible; }
};

QCReport run_qc_rules(const VelocityMap& velocity, const SegmentationMask& mask, const FlowCurve& curve,
                      const AliasingOptions& aliasing = {}, const PlausibilityOptions& plausibility = {});

}  // namespace pcflow
