#pragma once

#include <vector>

#include "pcflow/segment.hpp"
#include "pcflow/velocity.hpp"

namespace pcflow {

struct FlowCurve {
  std::vector<double> rates_ml_s;
  double frame_interval_s = 0.0;
  double pixel_area_cm2 = 0.0;
};

// Backward flow is kept signed (<= 0) so that net == forward + backward.
struct FlowParameters {
  double peak_flow_ml_s = 0.0;  // signed maximum frame rate
  double net_flow_ml = 0.0;
  double forward_flow_ml = 0.0;
  double backward_flow_ml = 0.0;
};

double pixel_area_cm2(const SeriesMetadata& meta);

FlowCurve compute_flow_curve(const VelocityMap& velocity, const SegmentationMask& mask);
FlowParameters extract_parameters(const FlowCurve& curve);

}  // namespace pcflow
