#include "pcflow/dicom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "pcflow/error.hpp"
#include "pcflow/io.hpp"

namespace pcflow {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kExplicitLittleEndian = "1.2.840.10008.1.2.1";
constexpr std::string_view kMrImageStorage = "1.2.840.10008.5.1.4.1.1.4";
constexpr std::size_t kPreamble = 128;

constexpr std::uint32_t tag(std::uint16_t group, std::uint16_t element) {
  return (static_cast<std::uint32_t>(group) << 16) | element;
}

namespace tags {
constexpr auto kTransferSyntax = tag(0x0002, 0x0010);
constexpr auto kImageType = tag(0x0008, 0x0008);
constexpr auto kManufacturer = tag(0x0008, 0x0070);
constexpr auto kSeriesDescription = tag(0x0008, 0x103E);
constexpr auto kTriggerTime = tag(0x0018, 0x1060);
constexpr auto kVencStandard = tag(0x0018, 0x9197);
constexpr auto kVencSiemens = tag(0x0051, 0x1014);
constexpr auto kVencPhilips = tag(0x2001, 0x101A);
constexpr auto kInstanceNumber = tag(0x0020, 0x0013);
constexpr auto kSamplesPerPixel = tag(0x0028, 0x0002);
constexpr auto kRows = tag(0x0028, 0x0010);
constexpr auto kColumns = tag(0x0028, 0x0011);
constexpr auto kPixelSpacing = tag(0x0028, 0x0030);
constexpr auto kBitsAllocated = tag(0x0028, 0x0100);
constexpr auto kPixelRepresentation = tag(0x0028, 0x0103);
constexpr auto kRescaleSlope = tag(0x0028, 0x1053);
constexpr auto kPixelData = tag(0x7FE0, 0x0010);
}  // namespace tags

constexpr std::uint16_t kItemGroup = 0xFFFE;
constexpr std::uint32_t kItem = tag(0xFFFE, 0xE000);
constexpr std::uint32_t kItemDelimiter = tag(0xFFFE, 0xE00D);
constexpr std::uint32_t kSequenceDelimiter = tag(0xFFFE, 0xE0DD);
constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFF;

bool long_form_vr(std::string_view vr) {
  static constexpr std::array<std::string_view, 13> kLong = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                              "SV", "UC", "UN", "UR", "UT", "UV"};
  return std::find(kLong.begin(), kLong.end(), vr) != kLong.end();
}

struct Element {
  std::string vr;
  std::span<const std::uint8_t> value;
};

using Dataset = std::map<std::uint32_t, Element>;

struct Header {
  std::uint32_t tag;
  std::string vr;
  std::uint32_t length;
};

Header read_header(io::ByteReader& r) {
  Header h;
  const std::uint16_t group = r.u16();
  const std::uint16_t element = r.u16();
  h.tag = tag(group, element);
  if (group == kItemGroup) {
    h.length = r.u32();
    return h;
  }
  auto vr = r.raw(2);
  h.vr.assign(vr.begin(), vr.end());
  if (!std::isupper(static_cast<unsigned char>(h.vr[0])) || !std::isupper(static_cast<unsigned char>(h.vr[1]))) {
    throw FormatError(fmt::format("element ({:04X},{:04X}) lacks an explicit VR", group, element));
  }
  if (long_form_vr(h.vr)) {
    r.u16();
    h.length = r.u32();
  } else {
    h.length = r.u16();
  }
  return h;
}

void skip_sequence(io::ByteReader& r);

// Skips dataset elements until an item delimiter.
void skip_item_dataset(io::ByteReader& r) {
  for (;;) {
    Header h = read_header(r);
    if (h.tag == kItemDelimiter) return;
    if (h.length == kUndefinedLength) {
      if (h.vr != "SQ") throw FormatError("undefined length outside a sequence");
      skip_sequence(r);
    } else {
      r.raw(h.length);
    }
  }
}

void skip_sequence(io::ByteReader& r) {
  for (;;) {
    Header h = read_header(r);
    if (h.tag == kSequenceDelimiter) return;
    if (h.tag != kItem) throw FormatError("malformed sequence item");
    if (h.length == kUndefinedLength) {
      skip_item_dataset(r);
    } else {
      r.raw(h.length);
    }
  }
}

// Reads top-level elements. Only the file meta group is read when `meta_only`.
void read_elements(io::ByteReader& r, Dataset& out, bool meta_only) {
  while (r.remaining() > 0) {
    if (meta_only) {
      // Peek at the group without consuming it.
      const std::size_t pos = r.position();
      const std::uint16_t group = r.u16();
      r.seek(pos);
      if (group != 0x0002) return;
    }
    Header h = read_header(r);
    if ((h.tag >> 16) == kItemGroup) throw FormatError("item tag at dataset level");
    if (h.length == kUndefinedLength) {
      if (h.tag == tags::kPixelData) throw FormatError("encapsulated (compressed) pixel data is not supported");
      if (h.vr != "SQ") throw FormatError(fmt::format("undefined length on non-sequence VR {}", h.vr));
      skip_sequence(r);
      continue;
    }
    out[h.tag] = Element{h.vr, r.raw(h.length)};
  }
}

std::string_view text_value(const Element& e) {
  std::string_view s(reinterpret_cast<const char*>(e.value.data()), e.value.size());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<std::string> split_values(std::string_view s) {
  std::vector<std::string> out;
  for (;;) {
    auto pos = s.find('\\');
    std::string_view part = s.substr(0, pos);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::optional<std::string> get_text(const Dataset& ds, std::uint32_t t) {
  auto it = ds.find(t);
  if (it == ds.end()) return std::nullopt;
  return std::string(text_value(it->second));
}

std::optional<std::uint16_t> get_us(const Dataset& ds, std::uint32_t t) {
  auto it = ds.find(t);
  if (it == ds.end()) return std::nullopt;
  if (it->second.value.size() < 2) throw FormatError(fmt::format("short US element {:08X}", t));
  io::ByteReader r(it->second.value);
  return r.u16();
}

std::optional<std::vector<double>> get_decimals(const Dataset& ds, std::uint32_t t) {
  auto text = get_text(ds, t);
  if (!text || text->empty()) return std::nullopt;
  std::vector<double> out;
  for (const auto& part : split_values(*text)) {
    try {
      out.push_back(io::parse_double(part));
    } catch (const FormatError&) {
      throw FormatError(fmt::format("tag {:08X}: '{}' is not a decimal string", t, part));
    }
  }
  return out;
}

std::optional<double> get_decimal(const Dataset& ds, std::uint32_t t) {
  auto v = get_decimals(ds, t);
  if (!v) return std::nullopt;
  return v->front();
}

std::optional<double> venc_from_tags(const Dataset& ds) {
  if (auto it = ds.find(tags::kVencStandard); it != ds.end() && it->second.value.size() >= 8) {
    io::ByteReader r(it->second.value);
    return r.f64();
  }
  if (auto it = ds.find(tags::kVencPhilips); it != ds.end()) {
    io::ByteReader r(it->second.value);
    while (r.remaining() >= 4) {
      float v = std::bit_cast<float>(r.u32());
      if (v != 0.0f) return std::abs(static_cast<double>(v));
    }
  }
  if (auto text = get_text(ds, tags::kVencSiemens)) {
    static const std::regex kPattern(R"(^v(\d+(?:\.\d+)?))");
    std::smatch m;
    if (std::regex_search(*text, m, kPattern)) return io::parse_double(m[1].str());
  }
  return std::nullopt;
}

enum class Component { kMagnitude, kPhase };

struct Slice {
  Component component;
  std::optional<double> trigger_ms;
  long instance = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double spacing_row = 0.0;
  double spacing_col = 0.0;
  bool is_signed = false;
  std::vector<std::uint16_t> pixels;
  std::optional<double> venc;
  std::optional<double> slope;
  std::string description;
  std::string manufacturer;
  fs::path file;
};

Component classify_component(const Dataset& ds, const fs::path& file) {
  auto text = get_text(ds, tags::kImageType);
  if (!text) throw FormatError(fmt::format("'{}': ImageType missing", file.string()));
  bool mag = false;
  bool phase = false;
  for (const auto& v : split_values(*text)) {
    if (v == "M" || v == "MAGNITUDE" || v == "M_PCA") mag = true;
    if (v == "P" || v == "PHASE" || v == "P_PCA" || v == "VELOCITY") phase = true;
  }
  if (mag == phase) {
    throw FormatError(fmt::format("'{}': cannot tell magnitude from phase in ImageType '{}'", file.string(), *text));
  }
  return mag ? Component::kMagnitude : Component::kPhase;
}

std::optional<Slice> read_slice(const fs::path& file) {
  const auto bytes = io::read_file(file);
  if (bytes.size() < kPreamble + 4 || std::memcmp(bytes.data() + kPreamble, "DICM", 4) != 0) return std::nullopt;

  io::ByteReader r{std::span<const std::uint8_t>(bytes).subspan(kPreamble + 4)};
  Dataset meta;
  read_elements(r, meta, true);
  auto syntax = get_text(meta, tags::kTransferSyntax);
  if (!syntax) throw FormatError(fmt::format("'{}': transfer syntax missing", file.string()));
  if (*syntax != kExplicitLittleEndian) {
    throw FormatError(fmt::format("'{}': unsupported transfer syntax {}", file.string(), *syntax));
  }
  Dataset ds;
  read_elements(r, ds, false);

  Slice s;
  s.file = file;
  s.component = classify_component(ds, file);
  s.trigger_ms = get_decimal(ds, tags::kTriggerTime);
  if (auto inst = get_decimal(ds, tags::kInstanceNumber)) s.instance = std::lround(*inst);

  auto rows = get_us(ds, tags::kRows);
  auto cols = get_us(ds, tags::kColumns);
  if (!rows || !cols) throw FormatError(fmt::format("'{}': Rows/Columns missing", file.string()));
  s.rows = *rows;
  s.cols = *cols;
  if (get_us(ds, tags::kSamplesPerPixel).value_or(1) != 1) {
    throw FormatError(fmt::format("'{}': only single-sample pixels are supported", file.string()));
  }
  if (get_us(ds, tags::kBitsAllocated).value_or(0) != 16) {
    throw FormatError(fmt::format("'{}': only 16-bit pixel data is supported", file.string()));
  }
  s.is_signed = get_us(ds, tags::kPixelRepresentation).value_or(0) == 1;

  auto spacing = get_decimals(ds, tags::kPixelSpacing);
  if (!spacing || spacing->size() != 2) {
    throw MetadataError(fmt::format("'{}': PixelSpacing missing or malformed", file.string()));
  }
  s.spacing_row = (*spacing)[0];
  s.spacing_col = (*spacing)[1];

  auto it = ds.find(tags::kPixelData);
  if (it == ds.end()) throw FormatError(fmt::format("'{}': no pixel data", file.string()));
  const std::size_t expected = s.rows * s.cols * 2;
  if (it->second.value.size() < expected) {
    throw TruncationError(fmt::format("'{}': pixel data has {} bytes, expected {}", file.string(),
                                      it->second.value.size(), expected));
  }
  io::ByteReader px(it->second.value.subspan(0, expected));
  s.pixels.resize(s.rows * s.cols);
  for (auto& v : s.pixels) v = px.u16();

  s.venc = venc_from_tags(ds);
  s.slope = get_decimal(ds, tags::kRescaleSlope);
  s.description = get_text(ds, tags::kSeriesDescription).value_or("");
  s.manufacturer = get_text(ds, tags::kManufacturer).value_or("");
  return s;
}

void sort_stack(std::vector<Slice>& stack, std::string_view name) {
  const bool all_trigger = std::all_of(stack.begin(), stack.end(), [](const Slice& s) { return s.trigger_ms; });
  const bool any_trigger = std::any_of(stack.begin(), stack.end(), [](const Slice& s) { return s.trigger_ms; });
  if (any_trigger && !all_trigger) {
    throw OrderingError(fmt::format("{} stack: trigger time present on some images only", name));
  }
  std::stable_sort(stack.begin(), stack.end(), [](const Slice& a, const Slice& b) {
    const double ta = a.trigger_ms.value_or(0.0);
    const double tb = b.trigger_ms.value_or(0.0);
    if (ta != tb) return ta < tb;
    return a.instance < b.instance;
  });
  for (std::size_t i = 1; i < stack.size(); ++i) {
    if (stack[i].trigger_ms.value_or(0.0) == stack[i - 1].trigger_ms.value_or(0.0) &&
        stack[i].instance == stack[i - 1].instance) {
      throw OrderingError(fmt::format("{} stack: frames '{}' and '{}' share trigger time and instance number", name,
                                      stack[i - 1].file.filename().string(), stack[i].file.filename().string()));
    }
  }
}

struct Sidecar {
  std::optional<double> venc;
  std::optional<double> rescale;
  std::optional<double> frame_interval;
  std::optional<double> spacing_row;
  std::optional<double> spacing_col;
  std::optional<std::string> series_id;
};

Sidecar read_sidecar(const fs::path& directory) {
  Sidecar out;
  const fs::path file = directory / kSidecarName;
  if (!fs::exists(file)) return out;
  const auto bytes = io::read_file(file);
  const auto kv = io::parse_key_values(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  auto number = [&](const char* key) -> std::optional<double> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    try {
      return io::parse_double(it->second);
    } catch (const FormatError&) {
      throw MetadataError(fmt::format("sidecar '{}': {}='{}' is not a number", file.string(), key, it->second));
    }
  };
  out.venc = number("venc_cm_s");
  out.rescale = number("rescale_factor");
  out.frame_interval = number("frame_interval_s");
  out.spacing_row = number("pixel_spacing_row_mm");
  out.spacing_col = number("pixel_spacing_col_mm");
  if (auto it = kv.find("series_id"); it != kv.end()) out.series_id = it->second;
  return out;
}

}  // namespace

PhaseContrastSeries parse_dicom_series(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError(fmt::format("'{}' is not a directory", directory.string()));

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().filename() != kSidecarName) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Slice> magnitude;
  std::vector<Slice> phase;
  for (const auto& f : files) {
    auto slice = read_slice(f);
    if (!slice) continue;
    (slice->component == Component::kMagnitude ? magnitude : phase).push_back(std::move(*slice));
  }
  if (magnitude.empty() || phase.empty()) {
    throw FormatError(fmt::format("'{}': need one magnitude and one phase stack (found {} / {} images)",
                                  directory.string(), magnitude.size(), phase.size()));
  }
  if (magnitude.size() != phase.size()) {
    throw GeometryError(fmt::format("'{}': magnitude has {} frames, phase has {}", directory.string(),
                                    magnitude.size(), phase.size()));
  }
  const Slice& ref = magnitude.front();
  for (const auto* stack : {&magnitude, &phase}) {
    for (const auto& s : *stack) {
      if (s.rows != ref.rows || s.cols != ref.cols) {
        throw GeometryError(fmt::format("'{}': {}x{} differs from {}x{}", s.file.string(), s.rows, s.cols, ref.rows,
                                        ref.cols));
      }
      if (s.spacing_row != ref.spacing_row || s.spacing_col != ref.spacing_col) {
        throw GeometryError(fmt::format("'{}': pixel spacing differs within the series", s.file.string()));
      }
    }
  }
  sort_stack(magnitude, "magnitude");
  sort_stack(phase, "phase");
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    const auto& tm = magnitude[i].trigger_ms;
    const auto& tp = phase[i].trigger_ms;
    if (tm.has_value() != tp.has_value() || (tm && std::abs(*tm - *tp) > 1e-6)) {
      throw OrderingError(fmt::format("'{}': frame {} trigger times differ between magnitude and phase",
                                      directory.string(), i));
    }
  }

  const Sidecar sidecar = read_sidecar(directory);
  SeriesMetadata meta;
  meta.rows = ref.rows;
  meta.cols = ref.cols;
  meta.num_frames = magnitude.size();
  meta.pixel_spacing_row_mm = sidecar.spacing_row.value_or(ref.spacing_row);
  meta.pixel_spacing_col_mm = sidecar.spacing_col.value_or(ref.spacing_col);
  meta.vendor_tag = ref.manufacturer;
  meta.series_id = sidecar.series_id.value_or(ref.description.empty() ? directory.filename().string()
                                                                         : ref.description);

  std::optional<double> venc = sidecar.venc;
  if (!venc) {
    for (const auto* stack : {&phase, &magnitude}) {
      for (const auto& s : *stack) {
        if (!s.venc) continue;
        if (venc && *venc != *s.venc) {
          throw MetadataError(fmt::format("'{}': conflicting VENC tags ({} vs {})", directory.string(), *venc,
                                          *s.venc));
        }
        venc = s.venc;
      }
    }
  }
  if (!venc) {
    throw MetadataError(fmt::format("'{}': VENC not found in tags or sidecar", directory.string()));
  }
  meta.venc_cm_s = *venc;

  std::optional<double> rescale = sidecar.rescale;
  if (!rescale) rescale = phase.front().slope;
  if (!rescale) {
    throw MetadataError(fmt::format("'{}': rescale factor not found in sidecar or RescaleSlope", directory.string()));
  }
  meta.rescale_factor = *rescale;

  if (sidecar.frame_interval) {
    meta.frame_interval_s = *sidecar.frame_interval;
  } else {
    if (magnitude.size() < 2 || !magnitude.front().trigger_ms) {
      throw MetadataError(
          fmt::format("'{}': frame interval needs a sidecar or at least two trigger times", directory.string()));
    }
    for (std::size_t i = 1; i < magnitude.size(); ++i) {
      if (!(*magnitude[i].trigger_ms > *magnitude[i - 1].trigger_ms)) {
        throw OrderingError(fmt::format("'{}': trigger times are not strictly increasing at frame {}",
                                        directory.string(), i));
      }
    }
    const double span_ms = *magnitude.back().trigger_ms - *magnitude.front().trigger_ms;
    meta.frame_interval_s = span_ms / static_cast<double>(magnitude.size() - 1) / 1000.0;
  }

  PhaseContrastSeries series;
  series.meta = meta;
  series.magnitude = Volume<std::uint16_t>(meta.dims());
  series.phase = Volume<std::int16_t>(meta.dims());
  for (std::size_t f = 0; f < meta.num_frames; ++f) {
    const auto& m = magnitude[f];
    if (m.is_signed) {
      for (std::uint16_t v : m.pixels) {
        if (v & 0x8000u) throw FormatError(fmt::format("'{}': negative magnitude pixel", m.file.string()));
      }
    }
    std::copy(m.pixels.begin(), m.pixels.end(), series.magnitude.frame(f).begin());

    const auto& p = phase[f];
    auto dst = series.phase.frame(f);
    for (std::size_t i = 0; i < p.pixels.size(); ++i) {
      const std::uint16_t v = p.pixels[i];
      if (!p.is_signed && v > 0x7FFF) {
        throw FormatError(fmt::format("'{}': unsigned phase value {} exceeds the signed range", p.file.string(), v));
      }
      dst[i] = static_cast<std::int16_t>(v);
    }
  }
  validate(series);
  return series;
}

// ---------------------------------------------------------------------------
// Writer

namespace {

class ElementWriter {
 public:
  void text(std::uint32_t t, std::string_view vr, std::string value) {
    if (value.size() % 2) value.push_back(vr == "UI" ? '\0' : ' ');
    header(t, vr, static_cast<std::uint32_t>(value.size()));
    w_.raw(value);
  }
  void us(std::uint32_t t, std::uint16_t v) {
    header(t, "US", 2);
    w_.u16(v);
  }
  void ul(std::uint32_t t, std::uint32_t v) {
    header(t, "UL", 4);
    w_.u32(v);
  }
  void fd(std::uint32_t t, double v) {
    header(t, "FD", 8);
    w_.f64(v);
  }
  void ob(std::uint32_t t, std::span<const std::uint8_t> v) {
    header(t, "OB", static_cast<std::uint32_t>(v.size()));
    w_.raw(v);
  }
  void ow(std::uint32_t t, std::span<const std::uint16_t> v) {
    header(t, "OW", static_cast<std::uint32_t>(v.size() * 2));
    for (auto x : v) w_.u16(x);
  }
  std::vector<std::uint8_t>& bytes() { return w_.bytes(); }

 private:
  void header(std::uint32_t t, std::string_view vr, std::uint32_t length) {
    w_.u16(static_cast<std::uint16_t>(t >> 16));
    w_.u16(static_cast<std::uint16_t>(t & 0xFFFF));
    w_.raw(vr);
    if (long_form_vr(vr)) {
      w_.u16(0);
      w_.u32(length);
    } else {
      w_.u16(static_cast<std::uint16_t>(length));
    }
  }
  io::ByteWriter w_;
};

// Decimal strings are limited to 16 characters.
std::string decimal_string(double v) {
  std::string s = io::format_double(v);
  for (int precision = 15; s.size() > 16 && precision > 1; --precision) s = fmt::format("{:.{}g}", v, precision);
  return s;
}

std::vector<std::uint8_t> encode_slice(const PhaseContrastSeries& series, std::size_t frame, Component component,
                                       const DicomWriteOptions& options) {
  const auto& meta = series.meta;
  const bool is_phase = component == Component::kPhase;
  const std::string sop_uid = fmt::format("2.25.{}.{}", is_phase ? 2 : 1, frame + 1);

  ElementWriter body;
  body.text(tags::kImageType, "CS", is_phase ? "ORIGINAL\\PRIMARY\\P\\ND" : "ORIGINAL\\PRIMARY\\M\\ND");
  body.text(tag(0x0008, 0x0016), "UI", std::string(kMrImageStorage));
  body.text(tag(0x0008, 0x0018), "UI", sop_uid);
  body.text(tag(0x0008, 0x0060), "CS", "MR");
  body.text(tags::kManufacturer, "LO", meta.vendor_tag);
  body.text(tags::kSeriesDescription, "LO", meta.series_id);
  body.text(tags::kTriggerTime, "DS", decimal_string(static_cast<double>(frame) * meta.frame_interval_s * 1000.0));
  if (options.venc_tag) body.fd(tags::kVencStandard, meta.venc_cm_s);
  body.text(tags::kInstanceNumber, "IS", std::to_string(frame + 1));
  body.us(tags::kSamplesPerPixel, 1);
  body.text(tag(0x0028, 0x0004), "CS", "MONOCHROME2");
  body.us(tags::kRows, static_cast<std::uint16_t>(meta.rows));
  body.us(tags::kColumns, static_cast<std::uint16_t>(meta.cols));
  body.text(tags::kPixelSpacing, "DS",
            decimal_string(meta.pixel_spacing_row_mm) + "\\" + decimal_string(meta.pixel_spacing_col_mm));
  body.us(tags::kBitsAllocated, 16);
  body.us(tag(0x0028, 0x0101), 16);
  body.us(tag(0x0028, 0x0102), 15);
  body.us(tags::kPixelRepresentation, is_phase ? 1 : 0);
  if (is_phase) body.text(tags::kRescaleSlope, "DS", decimal_string(meta.rescale_factor));
  std::vector<std::uint16_t> pixels(meta.rows * meta.cols);
  if (is_phase) {
    auto src = series.phase.frame(frame);
    std::transform(src.begin(), src.end(), pixels.begin(), [](std::int16_t v) { return static_cast<std::uint16_t>(v); });
  } else {
    auto src = series.magnitude.frame(frame);
    std::copy(src.begin(), src.end(), pixels.begin());
  }
  body.ow(tags::kPixelData, pixels);

  ElementWriter meta_group;
  const std::array<std::uint8_t, 2> version = {0x00, 0x01};
  meta_group.ob(tag(0x0002, 0x0001), version);
  meta_group.text(tag(0x0002, 0x0002), "UI", std::string(kMrImageStorage));
  meta_group.text(tag(0x0002, 0x0003), "UI", sop_uid);
  meta_group.text(tags::kTransferSyntax, "UI", std::string(kExplicitLittleEndian));
  meta_group.text(tag(0x0002, 0x0012), "UI", "2.25.7");

  io::ByteWriter file;
  file.raw(std::vector<std::uint8_t>(kPreamble, 0));
  file.raw("DICM");
  ElementWriter length;
  length.ul(tag(0x0002, 0x0000), static_cast<std::uint32_t>(meta_group.bytes().size()));
  file.raw(length.bytes());
  file.raw(meta_group.bytes());
  file.raw(body.bytes());
  return std::move(file.bytes());
}

}  // namespace

void write_dicom_series(const PhaseContrastSeries& series, const fs::path& directory,
                        const DicomWriteOptions& options) {
  validate(series);
  if (series.meta.rows > 0xFFFF || series.meta.cols > 0xFFFF) throw GeometryError("image too large for DICOM");
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", directory.string(), ec.message()));
  for (std::size_t f = 0; f < series.meta.num_frames; ++f) {
    io::write_file_atomic(directory / fmt::format("mag_{:04d}.dcm", f + 1),
                          encode_slice(series, f, Component::kMagnitude, options));
    io::write_file_atomic(directory / fmt::format("pha_{:04d}.dcm", f + 1),
                          encode_slice(series, f, Component::kPhase, options));
  }
  if (options.sidecar) {
    std::string text = fmt::format(
        "series_id={}\nvenc_cm_s={}\nrescale_factor={}\nframe_interval_s={}\npixel_spacing_row_mm={}\n"
        "pixel_spacing_col_mm={}\n",
        series.meta.series_id, io::format_double(series.meta.venc_cm_s), io::format_double(series.meta.rescale_factor),
        io::format_double(series.meta.frame_interval_s), io::format_double(series.meta.pixel_spacing_row_mm),
        io::format_double(series.meta.pixel_spacing_col_mm));
    io::write_file_atomic(directory / kSidecarName, text);
  }
}

}  // namespace pcflow
