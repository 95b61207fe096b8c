#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "oracles.hpp"
#include "pcflow/dicom.hpp"
#include "pcflow/error.hpp"
#include "pcflow/io.hpp"
#include "pcflow/phantom.hpp"
#include "pcflow/portable.hpp"

using namespace pcflow;
namespace fs = std::filesystem;

namespace {

PhantomConfig small_phantom(std::size_t frames, std::size_t size) {
  PhantomConfig c;
  c.series_id = "dicom_rt";
  c.image_size = size;
  c.num_frames = frames;
  c.grid_spacing_mm = 1.0;
  c.vessel_radius_cm = 1.2;
  c.venc_cm_s = 150.0;
  c.peak_velocity_cm_s = 90.0;
  c.waveform = Waveform::kHalfSine;
  return c;
}

std::vector<std::uint8_t> slurp(const fs::path& p) { return io::read_file(p); }

void dump(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("format_double round-trips and parse_double rejects junk") {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.1}) CHECK(io::parse_double(io::format_double(v)) == v);
  CHECK_THROWS_AS(io::parse_double("1.5x"), FormatError);
  CHECK_THROWS_AS(io::parse_double(""), FormatError);
}

TEST_CASE("key=value parsing") {
  auto kv = io::parse_key_values("# comment\n a = 1 \n\nb=x=y\n");
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "x=y");
  CHECK_THROWS_AS(io::parse_key_values("a=1\na=2\n"), FormatError);
}

TEST_CASE("ByteReader throws on over-read") {
  std::vector<std::uint8_t> bytes = {1, 2, 3};
  io::ByteReader r(bytes);
  CHECK(r.u16() == 0x0201);
  CHECK_THROWS_AS(r.u16(), TruncationError);
}

TEST_CASE("series validation") {
  auto s = oracle::random_series(1, 2, 16, 16);
  CHECK_NOTHROW(validate(s));
  auto bad = s;
  bad.meta.venc_cm_s = 0.0;
  CHECK_THROWS_AS(validate(bad), MetadataError);
  bad = s;
  bad.meta.rescale_factor = -1.0;
  CHECK_THROWS_AS(validate(bad), MetadataError);
  bad = s;
  bad.meta.rows = 15;
  CHECK_THROWS_AS(validate(bad), GeometryError);
  bad = s;
  bad.meta.num_frames = 3;
  CHECK_THROWS_AS(validate(bad), GeometryError);
}

TEST_CASE("portable container: one 8-frame 32x32 series round-trips exactly") {
  const auto dir = oracle::scratch_dir("pcs_one");
  const auto s = oracle::random_series(7, 8, 32, 32);
  write_portable_study(dir / "one.pcs", std::span(&s, 1));
  const auto back = parse_portable_study(dir / "one.pcs");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == s);
}

TEST_CASE("portable container: two series keep their order") {
  std::vector<PhaseContrastSeries> two = {oracle::random_series(1, 3, 16, 20), oracle::random_series(2, 2, 24, 16)};
  const auto back = decode_portable_study(encode_portable_study(two));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == two[0]);
  CHECK(back[1] == two[1]);
}

TEST_CASE("portable container: round-trip property over random series") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    pcflow::Rng rng(seed);
    auto s = oracle::random_series(seed, 1 + rng.below(4), 16 + rng.below(9), 16 + rng.below(9));
    s.meta.series_id = "id with spaces_" + std::to_string(seed);
    CHECK(decode_portable_study(encode_portable_study(std::span(&s, 1)))[0] == s);
  }
}

TEST_CASE("portable container: errors") {
  const auto s = oracle::random_series(3, 2, 16, 16);
  auto bytes = encode_portable_study(std::span(&s, 1));
  SUBCASE("bad magic") {
    bytes[3] = '2';
    CHECK_THROWS_AS(decode_portable_study(bytes), FormatError);
  }
  SUBCASE("truncated mid-payload") {
    bytes.resize(bytes.size() - 100);
    CHECK_THROWS_AS(decode_portable_study(bytes), TruncationError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_portable_study(bytes), FormatError);
  }
  SUBCASE("truncated file on disk") {
    const auto dir = oracle::scratch_dir("pcs_trunc");
    bytes.resize(bytes.size() / 2);
    dump(dir / "t.pcs", bytes);
    CHECK_THROWS_AS(parse_portable_study(dir / "t.pcs"), TruncationError);
  }
}

TEST_CASE("DICOM: phantom export (30 frames, 64x64) reads back") {
  const auto dir = oracle::scratch_dir("dicom_rt");
  const Phantom p = generate_phantom(small_phantom(30, 64));
  write_dicom_series(p.series, dir);
  const auto s = parse_dicom_series(dir);
  CHECK(s.meta.num_frames == 30);
  CHECK(s.meta.rows == 64);
  CHECK(s.meta.cols == 64);
  CHECK(s.meta.venc_cm_s == 150.0);
  CHECK(s.meta.rescale_factor == p.series.meta.rescale_factor);
  CHECK(s.meta.frame_interval_s == p.series.meta.frame_interval_s);
  CHECK(s.meta.series_id == "dicom_rt");
  CHECK(s.magnitude == p.series.magnitude);
  CHECK(s.phase == p.series.phase);
}

TEST_CASE("DICOM: VENC from the tag alone, and sidecar wins over tags") {
  const auto dir = oracle::scratch_dir("dicom_venc");
  Phantom p = generate_phantom(small_phantom(4, 32));
  write_dicom_series(p.series, dir, {.venc_tag = true, .sidecar = false});
  CHECK(parse_dicom_series(dir).meta.venc_cm_s == 150.0);

  const auto dir2 = oracle::scratch_dir("dicom_sidecar");
  write_dicom_series(p.series, dir2);
  std::ofstream(dir2 / kSidecarName, std::ios::trunc) << "venc_cm_s=200\nrescale_factor=0.5\nframe_interval_s=0.04\n";
  const auto s = parse_dicom_series(dir2);
  CHECK(s.meta.venc_cm_s == 200.0);
  CHECK(s.meta.rescale_factor == 0.5);
  CHECK(s.meta.frame_interval_s == 0.04);
}

TEST_CASE("DICOM: missing VENC tag and sidecar is a MetadataError") {
  const auto dir = oracle::scratch_dir("dicom_novenc");
  write_dicom_series(generate_phantom(small_phantom(3, 32)).series, dir, {.venc_tag = false, .sidecar = false});
  CHECK_THROWS_AS(parse_dicom_series(dir), MetadataError);
}

TEST_CASE("DICOM: 29 phase frames against 30 magnitude frames is a GeometryError") {
  const auto dir = oracle::scratch_dir("dicom_29");
  write_dicom_series(generate_phantom(small_phantom(30, 32)).series, dir);
  fs::remove(dir / "pha_0030.dcm");
  CHECK_THROWS_AS(parse_dicom_series(dir), GeometryError);
}

TEST_CASE("DICOM: duplicated frames are an OrderingError") {
  const auto dir = oracle::scratch_dir("dicom_dup");
  write_dicom_series(generate_phantom(small_phantom(5, 32)).series, dir);
  fs::copy_file(dir / "mag_0002.dcm", dir / "mag_dup.dcm");
  fs::copy_file(dir / "pha_0002.dcm", dir / "pha_dup.dcm");
  CHECK_THROWS_AS(parse_dicom_series(dir), OrderingError);
}

TEST_CASE("DICOM: frames are sorted by trigger time regardless of file names") {
  const auto dir = oracle::scratch_dir("dicom_sort");
  const auto p = generate_phantom(small_phantom(6, 32));
  write_dicom_series(p.series, dir);
  fs::rename(dir / "mag_0001.dcm", dir / "zz_last.dcm");
  fs::rename(dir / "pha_0006.dcm", dir / "aa_first.dcm");
  const auto s = parse_dicom_series(dir);
  CHECK(s.magnitude == p.series.magnitude);
  CHECK(s.phase == p.series.phase);
}

TEST_CASE("DICOM: unsupported transfer syntax is a FormatError; non-DICOM files are ignored") {
  const auto dir = oracle::scratch_dir("dicom_syntax");
  write_dicom_series(generate_phantom(small_phantom(2, 32)).series, dir);
  std::ofstream(dir / "notes.txt") << "not an image";
  CHECK_NOTHROW(parse_dicom_series(dir));

  auto bytes = slurp(dir / "mag_0001.dcm");
  const std::string le = "1.2.840.10008.1.2.1";
  auto it = std::search(bytes.begin(), bytes.end(), le.begin(), le.end());
  REQUIRE(it != bytes.end());
  *(it + static_cast<std::ptrdiff_t>(le.size()) - 1) = '2';  // explicit VR big endian
  dump(dir / "mag_0001.dcm", bytes);
  CHECK_THROWS_AS(parse_dicom_series(dir), FormatError);
}
