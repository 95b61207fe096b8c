#include "pcflow/segment.hpp"

#include <cmath>
#include <deque>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"

namespace pcflow {

std::string_view to_string(MaskSource source) {
  return source == MaskSource::kExternal ? "external" : "propagated";
}

namespace {

struct Grid {
  std::size_t rows;
  std::size_t cols;
  Connectivity connectivity;

  // Neighbours in fixed order: up, left, right, down, then diagonals.
  template <typename Fn>
  void for_neighbours(std::size_t idx, Fn&& fn) const {
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(idx / cols);
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(idx % cols);
    static constexpr int kOffsets[8][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    const int count = connectivity == Connectivity::kFour ? 4 : 8;
    for (int k = 0; k < count; ++k) {
      const std::ptrdiff_t nr = r + kOffsets[k][0];
      const std::ptrdiff_t nc = c + kOffsets[k][1];
      if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(rows) || nc >= static_cast<std::ptrdiff_t>(cols)) {
        continue;
      }
      fn(static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc));
    }
  }
};

// Breadth-first growth from `starts` through pixels with magnitude >= threshold.
// Start pixels are members unconditionally.
void grow(const Grid& grid, std::span<const std::uint16_t> magnitude, double threshold,
          std::span<const std::size_t> starts, std::span<std::uint8_t> out) {
  std::deque<std::size_t> queue;
  for (std::size_t s : starts) {
    if (!out[s]) {
      out[s] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    grid.for_neighbours(idx, [&](std::size_t n) {
      if (!out[n] && static_cast<double>(magnitude[n]) >= threshold) {
        out[n] = 1;
        queue.push_back(n);
      }
    });
  }
}

// Rounded centroid of the foreground; the frame must be non-empty.
std::size_t centroid_index(std::span<const std::uint8_t> frame, std::size_t cols) {
  double sr = 0.0;
  double sc = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!frame[i]) continue;
    sr += static_cast<double>(i / cols);
    sc += static_cast<double>(i % cols);
    n += 1.0;
  }
  const auto r = static_cast<std::size_t>(std::lround(sr / n));
  const auto c = static_cast<std::size_t>(std::lround(sc / n));
  return r * cols + c;
}

}  // namespace

bool is_single_component(std::span<const std::uint8_t> frame, std::size_t rows, std::size_t cols,
                         Connectivity connectivity) {
  std::size_t first = frame.size();
  std::size_t total = 0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame[i]) {
      if (first == frame.size()) first = i;
      ++total;
    }
  }
  if (total == 0) return false;
  const Grid grid{rows, cols, connectivity};
  std::vector<std::uint8_t> seen(frame.size(), 0);
  std::deque<std::size_t> queue{first};
  seen[first] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    grid.for_neighbours(idx, [&](std::size_t n) {
      if (frame[n] && !seen[n]) {
        seen[n] = 1;
        ++reached;
        queue.push_back(n);
      }
    });
  }
  return reached == total;
}

PropagationResult propagate_segmentation(const PhaseContrastSeries& series, const SeedContour& seed,
                                         const PropagationOptions& options) {
  validate(series);
  const auto& meta = series.meta;
  if (!(options.threshold_fraction > 0.0 && options.threshold_fraction < 1.0)) {
    throw ConfigError(fmt::format("threshold fraction {} outside (0,1)", options.threshold_fraction));
  }
  if (seed.pixels.empty()) throw SeedError("seed contour is empty");
  if (seed.frame_index >= meta.num_frames) {
    throw GeometryError(fmt::format("seed frame {} outside [0,{})", seed.frame_index, meta.num_frames));
  }
  const Grid grid{meta.rows, meta.cols, options.connectivity};
  std::vector<std::uint8_t> seed_frame(meta.rows * meta.cols, 0);
  std::vector<std::size_t> starts;
  for (const auto& p : seed.pixels) {
    if (p.row >= meta.rows || p.col >= meta.cols) {
      throw GeometryError(fmt::format("seed pixel ({},{}) outside {}x{}", p.row, p.col, meta.rows, meta.cols));
    }
    const std::size_t idx = p.row * meta.cols + p.col;
    if (!seed_frame[idx]) starts.push_back(idx);
    seed_frame[idx] = 1;
  }
  if (!is_single_component(seed_frame, meta.rows, meta.cols, options.connectivity)) {
    throw SeedError("seed pixels do not form one connected component");
  }

  const auto seed_magnitude = series.magnitude.frame(seed.frame_index);
  double sum = 0.0;
  for (std::size_t idx : starts) sum += static_cast<double>(seed_magnitude[idx]);
  const double mean = sum / static_cast<double>(starts.size());
  if (mean == 0.0) throw SeedError("mean magnitude inside the seed is zero");
  const double threshold = options.threshold_fraction * mean;

  PropagationResult result;
  result.mask.source = MaskSource::kPropagated;
  result.mask.mask = Volume<std::uint8_t>(meta.dims());
  auto& mask = result.mask.mask;
  grow(grid, seed_magnitude, threshold, starts, mask.frame(seed.frame_index));

  auto step = [&](std::size_t from, std::size_t to) {
    const auto prev = mask.frame(from);
    auto cur = mask.frame(to);
    const auto magnitude = series.magnitude.frame(to);
    const std::size_t centre = centroid_index(prev, meta.cols);
    if (static_cast<double>(magnitude[centre]) >= threshold) {
      const std::size_t start[] = {centre};
      grow(grid, magnitude, threshold, start, cur);
    } else {
      std::copy(prev.begin(), prev.end(), cur.begin());
      result.warnings.push_back(
          {to, fmt::format("frame {}: centroid ({},{}) below threshold {:.6g}; reused frame {} mask", to,
                           centre / meta.cols, centre % meta.cols, threshold, from)});
    }
  };
  for (std::size_t f = seed.frame_index + 1; f < meta.num_frames; ++f) step(f - 1, f);
  for (std::size_t f = seed.frame_index; f-- > 0;) step(f + 1, f);
  return result;
}

// ---------------------------------------------------------------------------
// .pcm

namespace {
constexpr std::string_view kMaskMagic = "PCM1";
}

std::vector<std::uint8_t> encode_mask(const Volume<std::uint8_t>& mask) {
  const Dims d = mask.dims();
  io::ByteWriter w;
  w.raw(kMaskMagic);
  w.u32(static_cast<std::uint32_t>(d.frames));
  w.u32(static_cast<std::uint32_t>(d.rows));
  w.u32(static_cast<std::uint32_t>(d.cols));
  std::vector<std::uint8_t> packed((d.size() + 7) / 8, 0);
  const auto bits = mask.data();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  w.raw(packed);
  return std::move(w.bytes());
}

Volume<std::uint8_t> decode_mask(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMaskMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMaskMagic.size()) != kMaskMagic) {
    throw FormatError("not a PCM1 mask file");
  }
  io::ByteReader r(bytes.subspan(kMaskMagic.size()));
  Dims d;
  try {
    d.frames = r.u32();
    d.rows = r.u32();
    d.cols = r.u32();
  } catch (const TruncationError&) {
    throw FormatError("mask header truncated");
  }
  const std::size_t packed_size = (d.size() + 7) / 8;
  if (r.remaining() != packed_size) {
    throw FormatError(fmt::format("mask payload has {} bytes, {}x{}x{} needs {}", r.remaining(), d.frames, d.rows,
                                  d.cols, packed_size));
  }
  auto packed = r.raw(packed_size);
  Volume<std::uint8_t> mask(d);
  auto bits = mask.data();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
  if (d.size() % 8 != 0 && (packed.back() >> (d.size() % 8)) != 0) {
    throw FormatError("mask padding bits are not zero");
  }
  return mask;
}

void write_mask_file(const std::filesystem::path& file, const Volume<std::uint8_t>& mask) {
  io::write_file_atomic(file, encode_mask(mask));
}

SegmentationMask load_external_masks(const std::filesystem::path& file, const PhaseContrastSeries& series) {
  SegmentationMask out{decode_mask(io::read_file(file)), MaskSource::kExternal};
  const Dims d = out.mask.dims();
  const Dims expected = series.meta.dims();
  if (d != expected) {
    throw GeometryError(fmt::format("mask '{}' is {}x{}x{}, series '{}' is {}x{}x{}", file.string(), d.frames, d.rows,
                                    d.cols, series.meta.series_id, expected.frames, expected.rows, expected.cols));
  }
  return out;
}

}  // namespace pcflow
