#pragma once

#include <string_view>

#include "pcflow/series.hpp"
#include "pcflow/volume.hpp"

namespace pcflow {

enum class VelocityFormula {
  kPaper,         // v = (10 pi R / VENC) * P * M
  kConventional,  // v = VENC * (P / phase_range) * R
};

std::string_view to_string(VelocityFormula formula);
VelocityFormula parse_velocity_formula(std::string_view text);

struct VelocityOptions {
  VelocityFormula formula = VelocityFormula::kPaper;
  double phase_range = 4096.0;  // |P| that maps to VENC, conventional mode only
};

struct VelocityMap {
  Volume<double> values;  // cm/s
  SeriesMetadata meta;
};

// Per-pixel multiplier applied to P (paper mode additionally multiplies by M).
double velocity_scale(const SeriesMetadata& meta, const VelocityOptions& options = {});

VelocityMap reconstruct_velocity(const PhaseContrastSeries& series, const VelocityOptions& options = {});

}  // namespace pcflow
