#pragma once

#include <cstdint>
#include <string>

#include "pcflow/volume.hpp"

namespace pcflow {

struct SeriesMetadata {
  double venc_cm_s = 0.0;
  double rescale_factor = 1.0;  // reconstruction scaling factor R
  double pixel_spacing_row_mm = 0.0;
  double pixel_spacing_col_mm = 0.0;
  double frame_interval_s = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t num_frames = 0;
  std::string series_id;
  std::string vendor_tag;

  Dims dims() const { return {num_frames, rows, cols}; }
  friend bool operator==(const SeriesMetadata&, const SeriesMetadata&) = default;
};

// Paired magnitude (M) and phase (P) raw pixels, stored unscaled.
struct PhaseContrastSeries {
  SeriesMetadata meta;
  Volume<std::uint16_t> magnitude;
  Volume<std::int16_t> phase;

  friend bool operator==(const PhaseContrastSeries&, const PhaseContrastSeries&) = default;
};

inline constexpr std::size_t kMinImageExtent = 16;

// Throws MetadataError for invalid scanner parameters and GeometryError for
// shape mismatches.
void validate(const SeriesMetadata& meta);
void validate(const PhaseContrastSeries& series);

}  // namespace pcflow
