#include "pcflow/series.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pcflow/error.hpp"

namespace pcflow {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void validate(const SeriesMetadata& meta) {
  if (!positive_finite(meta.venc_cm_s)) {
    throw MetadataError(fmt::format("series '{}': venc must be > 0 (got {})", meta.series_id, meta.venc_cm_s));
  }
  if (!positive_finite(meta.rescale_factor)) {
    throw MetadataError(
        fmt::format("series '{}': rescale factor must be > 0 (got {})", meta.series_id, meta.rescale_factor));
  }
  if (!positive_finite(meta.pixel_spacing_row_mm) || !positive_finite(meta.pixel_spacing_col_mm)) {
    throw MetadataError(fmt::format("series '{}': pixel spacing must be > 0", meta.series_id));
  }
  if (!positive_finite(meta.frame_interval_s)) {
    throw MetadataError(fmt::format("series '{}': frame interval must be > 0", meta.series_id));
  }
  if (meta.num_frames < 1) {
    throw GeometryError(fmt::format("series '{}': at least one frame required", meta.series_id));
  }
  if (meta.rows < kMinImageExtent || meta.cols < kMinImageExtent) {
    throw GeometryError(fmt::format("series '{}': image {}x{} below the {}x{} minimum", meta.series_id, meta.rows,
                                    meta.cols, kMinImageExtent, kMinImageExtent));
  }
}

void validate(const PhaseContrastSeries& series) {
  validate(series.meta);
  const Dims expected = series.meta.dims();
  if (series.magnitude.dims() != expected || series.phase.dims() != expected) {
    throw GeometryError(fmt::format("series '{}': pixel arrays do not match {}x{}x{} metadata", series.meta.series_id,
                                    expected.frames, expected.rows, expected.cols));
  }
}

}  // namespace pcflow
