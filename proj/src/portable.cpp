#include "pcflow/portable.hpp"

#include <charconv>
#include <string>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"

namespace pcflow {

namespace {

constexpr std::string_view kMagic = "PCS1";

void check_value(std::string_view key, const std::string& value) {
  if (value.find_first_of("\r\n") != std::string::npos) {
    throw FormatError(fmt::format("metadata '{}' contains a line break", key));
  }
  if (!value.empty() && (value.front() == ' ' || value.back() == ' ')) {
    throw FormatError(fmt::format("metadata '{}' has leading/trailing spaces", key));
  }
}

std::string encode_metadata(const SeriesMetadata& m) {
  check_value("series_id", m.series_id);
  check_value("vendor_tag", m.vendor_tag);
  std::string out;
  auto line = [&out](std::string_view key, const std::string& value) {
    out.append(key).append("=").append(value).append("\n");
  };
  line("series_id", m.series_id);
  line("vendor_tag", m.vendor_tag);
  line("venc_cm_s", io::format_double(m.venc_cm_s));
  line("rescale_factor", io::format_double(m.rescale_factor));
  line("pixel_spacing_row_mm", io::format_double(m.pixel_spacing_row_mm));
  line("pixel_spacing_col_mm", io::format_double(m.pixel_spacing_col_mm));
  line("frame_interval_s", io::format_double(m.frame_interval_s));
  line("rows", std::to_string(m.rows));
  line("cols", std::to_string(m.cols));
  line("num_frames", std::to_string(m.num_frames));
  return out;
}

const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(fmt::format("metadata block lacks '{}'", key));
  return it->second;
}

std::size_t parse_count(const std::string& text, std::string_view key) {
  std::size_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(fmt::format("metadata '{}' is not an unsigned integer: '{}'", key, text));
  }
  return value;
}

SeriesMetadata decode_metadata(std::string_view text) {
  const auto kv = io::parse_key_values(text);
  SeriesMetadata m;
  m.series_id = require_key(kv, "series_id");
  m.vendor_tag = require_key(kv, "vendor_tag");
  m.venc_cm_s = io::parse_double(require_key(kv, "venc_cm_s"));
  m.rescale_factor = io::parse_double(require_key(kv, "rescale_factor"));
  m.pixel_spacing_row_mm = io::parse_double(require_key(kv, "pixel_spacing_row_mm"));
  m.pixel_spacing_col_mm = io::parse_double(require_key(kv, "pixel_spacing_col_mm"));
  m.frame_interval_s = io::parse_double(require_key(kv, "frame_interval_s"));
  m.rows = parse_count(require_key(kv, "rows"), "rows");
  m.cols = parse_count(require_key(kv, "cols"), "cols");
  m.num_frames = parse_count(require_key(kv, "num_frames"), "num_frames");
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_portable_study(std::span<const PhaseContrastSeries> series) {
  io::ByteWriter w;
  w.raw(kMagic);
  w.u32(static_cast<std::uint32_t>(series.size()));
  for (const auto& s : series) {
    validate(s);
    const std::string meta = encode_metadata(s.meta);
    w.u32(static_cast<std::uint32_t>(meta.size()));
    w.raw(meta);
    for (std::uint16_t v : s.magnitude.data()) w.u16(v);
    for (std::int16_t v : s.phase.data()) w.u16(static_cast<std::uint16_t>(v));
  }
  return std::move(w.bytes());
}

std::vector<PhaseContrastSeries> decode_portable_study(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMagic.size()) != kMagic) {
    throw FormatError("not a PCS1 container (bad magic or version)");
  }
  io::ByteReader r(bytes.subspan(kMagic.size()));
  const std::uint32_t count = r.u32();
  std::vector<PhaseContrastSeries> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t meta_len = r.u32();
    auto meta_bytes = r.raw(meta_len);
    PhaseContrastSeries s;
    s.meta = decode_metadata(std::string_view(reinterpret_cast<const char*>(meta_bytes.data()), meta_bytes.size()));
    validate(s.meta);
    const Dims dims = s.meta.dims();
    // Check the payload before allocating so a corrupt header cannot request huge buffers.
    if (dims.size() > r.remaining() / 4) {
      throw TruncationError(fmt::format("series '{}': payload needs {} bytes, {} remain", s.meta.series_id,
                                        dims.size() * 4, r.remaining()));
    }
    s.magnitude = Volume<std::uint16_t>(dims);
    s.phase = Volume<std::int16_t>(dims);
    for (auto& v : s.magnitude.data()) v = r.u16();
    for (auto& v : s.phase.data()) v = static_cast<std::int16_t>(r.u16());
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw FormatError(fmt::format("{} trailing bytes after the last series", r.remaining()));
  }
  return out;
}

void write_portable_study(const std::filesystem::path& file, std::span<const PhaseContrastSeries> series) {
  io::write_file_atomic(file, encode_portable_study(series));
}

std::vector<PhaseContrastSeries> parse_portable_study(const std::filesystem::path& file) {
  return decode_portable_study(io::read_file(file));
}

}  // namespace pcflow
