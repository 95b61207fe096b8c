#include "pcflow/velocity.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/kernels.hpp"

namespace pcflow {

std::string_view to_string(VelocityFormula formula) {
  return formula == VelocityFormula::kPaper ? "paper" : "conventional";
}

VelocityFormula parse_velocity_formula(std::string_view text) {
  if (text == "paper") return VelocityFormula::kPaper;
  if (text == "conventional") return VelocityFormula::kConventional;
  throw ConfigError(fmt::format("unknown velocity formula '{}' (expected paper|conventional)", text));
}

double velocity_scale(const SeriesMetadata& meta, const VelocityOptions& options) {
  if (!(meta.venc_cm_s > 0.0)) throw MetadataError("venc must be > 0");
  if (options.formula == VelocityFormula::kPaper) {
    return 10.0 * std::numbers::pi * meta.rescale_factor / meta.venc_cm_s;
  }
  if (!(options.phase_range > 0.0)) throw ConfigError("phase range must be > 0");
  return meta.venc_cm_s * meta.rescale_factor / options.phase_range;
}

VelocityMap reconstruct_velocity(const PhaseContrastSeries& series, const VelocityOptions& options) {
  validate(series);
  VelocityMap out{Volume<double>(series.meta.dims()), series.meta};
  const double scale = velocity_scale(series.meta, options);
  if (options.formula == VelocityFormula::kPaper) {
    kernels::velocity_product_parallel(series.phase.data(), series.magnitude.data(), scale, out.values.data());
  } else {
    kernels::velocity_linear_parallel(series.phase.data(), scale, out.values.data());
  }
  return out;
}

}  // namespace pcflow
