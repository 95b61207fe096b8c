#include "pcflow/flow.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/kernels.hpp"

namespace pcflow {

double pixel_area_cm2(const SeriesMetadata& meta) {
  return (meta.pixel_spacing_row_mm / 10.0) * (meta.pixel_spacing_col_mm / 10.0);
}

FlowCurve compute_flow_curve(const VelocityMap& velocity, const SegmentationMask& mask) {
  const Dims d = velocity.values.dims();
  if (mask.mask.dims() != d) {
    const Dims m = mask.mask.dims();
    throw GeometryError(fmt::format("mask {}x{}x{} does not match velocity {}x{}x{}", m.frames, m.rows, m.cols,
                                    d.frames, d.rows, d.cols));
  }
  if (!(velocity.meta.frame_interval_s > 0.0)) throw MetadataError("frame interval must be > 0");
  FlowCurve curve;
  curve.frame_interval_s = velocity.meta.frame_interval_s;
  curve.pixel_area_cm2 = pixel_area_cm2(velocity.meta);
  curve.rates_ml_s.assign(d.frames, 0.0);
  kernels::masked_frame_sums_parallel(velocity.values.data(), mask.mask.data(), d.frame_size(),
                                      curve.pixel_area_cm2, curve.rates_ml_s);
  return curve;
}

FlowParameters extract_parameters(const FlowCurve& curve) {
  if (curve.rates_ml_s.empty()) throw EmptyInputError("flow curve has no frames");
  double positive = 0.0;
  double negative = 0.0;
  for (double q : curve.rates_ml_s) {
    positive += std::max(q, 0.0);
    negative += std::min(q, 0.0);
  }
  const double dt = curve.frame_interval_s;
  FlowParameters p;
  p.peak_flow_ml_s = *std::max_element(curve.rates_ml_s.begin(), curve.rates_ml_s.end());
  p.forward_flow_ml = dt * positive;
  p.backward_flow_ml = dt * negative;
  // Sum of the two partial sums, so the partition identity holds exactly.
  p.net_flow_ml = p.forward_flow_ml + p.backward_flow_ml;
  return p;
}

}  // namespace pcflow
