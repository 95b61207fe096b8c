#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pcflow/series.hpp"

namespace pcflow {

// Portable study container (.pcs):
//   "PCS1" | u32 series count | per series:
//     u32 metadata length | UTF-8 key=value lines |
//     magnitude u16 LE [frame][row][col] | phase i16 LE, same layout
// All integers little-endian.
std::vector<std::uint8_t> encode_portable_study(std::span<const PhaseContrastSeries> series);
std::vector<PhaseContrastSeries> decode_portable_study(std::span<const std::uint8_t> bytes);

void write_portable_study(const std::filesystem::path& file, std::span<const PhaseContrastSeries> series);
std::vector<PhaseContrastSeries> parse_portable_study(const std::filesystem::path& file);

}  // namespace pcflow
