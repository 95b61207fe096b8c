#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcflow/series.hpp"
#include "pcflow/volume.hpp"

namespace pcflow {

enum class MaskSource { kExternal, kPropagated };

std::string_view to_string(MaskSource source);

struct SegmentationMask {
  Volume<std::uint8_t> mask;  // 0 or 1, [frame][row][col]
  MaskSource source = MaskSource::kExternal;

  friend bool operator==(const SegmentationMask&, const SegmentationMask&) = default;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct SeedContour {
  std::size_t frame_index = 0;
  std::vector<Pixel> pixels;
};

enum class Connectivity { kFour = 4, kEight = 8 };

struct PropagationOptions {
  double threshold_fraction = 0.5;
  Connectivity connectivity = Connectivity::kFour;
};

struct PropagationWarning {
  std::size_t frame = 0;
  std::string message;
};

struct PropagationResult {
  SegmentationMask mask;
  std::vector<PropagationWarning> warnings;
};

// Magnitude-threshold region growing. The seed frame grows from the seed
// pixels; every other frame grows from the rounded centroid of its temporal
// neighbour's mask. The threshold is threshold_fraction times the mean seed
// magnitude and stays fixed for the whole series. A frame whose centroid pixel
// falls below threshold keeps the neighbour's mask and records a warning.
PropagationResult propagate_segmentation(const PhaseContrastSeries& series, const SeedContour& seed,
                                         const PropagationOptions& options = {});

// True when the foreground of one frame forms exactly one connected component.
bool is_single_component(std::span<const std::uint8_t> frame, std::size_t rows, std::size_t cols,
                         Connectivity connectivity = Connectivity::kFour);

// Mask file (.pcm): "PCM1" | u32 frames | u32 rows | u32 cols |
// ceil(frames*rows*cols / 8) bytes, frame-major row-major bits, LSB first.
std::vector<std::uint8_t> encode_mask(const Volume<std::uint8_t>& mask);
Volume<std::uint8_t> decode_mask(std::span<const std::uint8_t> bytes);
void write_mask_file(const std::filesystem::path& file, const Volume<std::uint8_t>& mask);

SegmentationMask load_external_masks(const std::filesystem::path& file, const PhaseContrastSeries& series);

}  // namespace pcflow
