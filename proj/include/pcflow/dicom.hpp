#pragma once

#include <filesystem>

#include "pcflow/series.hpp"

namespace pcflow {

// Reader for the DICOM subset used by single-slice 2D phase-contrast series:
// Part 10 files, explicit VR little endian, uncompressed 16-bit pixel data,
// one frame per file. Anything else is a FormatError.
//
// A directory holds one magnitude and one phase stack, told apart by ImageType
// (M / MAGNITUDE / M_PCA vs P / PHASE / P_PCA / VELOCITY). Frames are ordered
// by trigger time, then instance number.
//
// VENC is taken from the sidecar when present, else from the first tag found in:
//   (0018,9197) Velocity Encoding Maximum Value, FD
//   (2001,101A) Philips PC velocity, first non-zero component
//   (0051,1014) Siemens "v<venc>..." sequence string
// R comes from the sidecar or RescaleSlope (0028,1053) of the phase stack.
// Sidecar keys: venc_cm_s, rescale_factor, frame_interval_s, series_id and
// pixel_spacing_row_mm / pixel_spacing_col_mm, the last two overriding the
// 16-character PixelSpacing tag.
inline constexpr const char* kSidecarName = "sidecar.txt";

PhaseContrastSeries parse_dicom_series(const std::filesystem::path& directory);

struct DicomWriteOptions {
  bool venc_tag = true;  // write (0018,9197)
  bool sidecar = true;
};

// Writes mag_NNNN.dcm / pha_NNNN.dcm (and the sidecar) into `directory`.
void write_dicom_series(const PhaseContrastSeries& series, const std::filesystem::path& directory,
                        const DicomWriteOptions& options = {});

}  // namespace pcflow
