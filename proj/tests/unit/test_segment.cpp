#include <doctest.h>

#include "oracles.hpp"
#include "pcflow/error.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/phantom.hpp"
#include "pcflow/segment.hpp"

using namespace pcflow;

namespace {

// Disk vessel of radius 12 px: magnitude 1000 inside, 50 outside.
Phantom disk_phantom(std::uint64_t seed = 0, double row_offset = 0.0, double col_offset = 0.0) {
  PhantomConfig c;
  c.series_id = "disk";
  c.image_size = 64;
  c.grid_spacing_mm = 1.0;
  c.vessel_radius_cm = 1.2;
  c.num_frames = 12;
  c.waveform = Waveform::kHalfSine;
  c.centre_offset_row_px = row_offset;
  c.centre_offset_col_px = col_offset;
  c.rng_seed = seed;
  return generate_phantom(c);
}

SeedContour centre_seed(const Phantom& p, std::size_t frame) {
  const std::size_t n = p.series.meta.rows;
  double r = 0, c = 0, count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (p.truth.mask.mask(frame, i, j)) r += static_cast<double>(i), c += static_cast<double>(j), count += 1;
  const auto cr = static_cast<std::size_t>(std::lround(r / count));
  const auto cc = static_cast<std::size_t>(std::lround(c / count));
  return {frame, {{cr, cc - 1}, {cr, cc}, {cr, cc + 1}}};
}

PhaseContrastSeries constant_series(std::uint16_t m) {
  auto s = oracle::random_series(1, 3, 20, 24);
  for (auto& v : s.magnitude.data()) v = m;
  return s;
}

}  // namespace

TEST_CASE("propagation: disk phantom, 3-pixel centre seed, threshold 0.5 gives Dice >= 0.95 on every frame") {
  const auto p = disk_phantom();
  const auto result = propagate_segmentation(p.series, centre_seed(p, 4));
  CHECK(result.mask.source == MaskSource::kPropagated);
  CHECK(result.warnings.empty());
  for (std::size_t f = 0; f < p.series.meta.num_frames; ++f) {
    CHECK(metrics::dice(result.mask.mask.frame(f), p.truth.mask.mask.frame(f)) >= 0.95);
    CHECK(is_single_component(result.mask.mask.frame(f), 64, 64));
  }
}

TEST_CASE("propagation: seed in a zero-magnitude background is a SeedError") {
  auto s = constant_series(0);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {{3, 3}}}), SeedError);
}

TEST_CASE("propagation: constant magnitude fills every frame") {
  const auto s = constant_series(500);
  const auto r = propagate_segmentation(s, {1, {{10, 10}}});
  for (auto v : r.mask.mask.data()) CHECK(v == 1);
}

TEST_CASE("propagation: invalid seeds and thresholds") {
  const auto s = constant_series(500);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {}}), SeedError);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {{1, 1}, {5, 5}}}), SeedError);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {{20, 1}}}), GeometryError);
  CHECK_THROWS_AS(propagate_segmentation(s, {3, {{1, 1}}}), GeometryError);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {{1, 1}}}, {1.0}), ConfigError);
  CHECK_THROWS_AS(propagate_segmentation(s, {0, {{1, 1}}}, {0.0}), ConfigError);
}

TEST_CASE("propagation: frames whose centroid falls below threshold keep the previous mask with a warning") {
  auto p = disk_phantom();
  auto s = p.series;
  for (auto& m : s.magnitude.frame(7)) m = 10;
  const auto r = propagate_segmentation(s, centre_seed(p, 2));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].frame == 7);
  CHECK(std::equal(r.mask.mask.frame(7).begin(), r.mask.mask.frame(7).end(), r.mask.mask.frame(6).begin()));
}

TEST_CASE("propagation: raising the threshold never adds seed-frame pixels; masks stay connected") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    auto s = oracle::random_series(seed, 3, 20, 20);
    for (auto& m : s.magnitude.data()) m = static_cast<std::uint16_t>(rng.below(1000));
    SeedContour contour{rng.below(3), {{rng.below(20), rng.below(20)}}};
    auto& seed_px = contour.pixels[0];
    s.magnitude(contour.frame_index, seed_px.row, seed_px.col) = 800;
    double lo = rng.uniform(0.05, 0.9);
    double hi = rng.uniform(lo, 0.95);
    const auto a = propagate_segmentation(s, contour, {lo});
    const auto b = propagate_segmentation(s, contour, {hi});
    const auto fa = a.mask.mask.frame(contour.frame_index);
    const auto fb = b.mask.mask.frame(contour.frame_index);
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fb[i] <= fa[i]);
    for (std::size_t f = 0; f < 3; ++f) {
      CHECK(is_single_component(a.mask.mask.frame(f), 20, 20));
      std::size_t count = 0;
      for (auto v : a.mask.mask.frame(f)) count += v;
      CHECK(count >= 1);
    }
    CHECK(propagate_segmentation(s, contour, {lo}).mask == a.mask);
  }
}

TEST_CASE("connectivity helper") {
  std::vector<std::uint8_t> f(16 * 16, 0);
  f[0] = 1;
  f[17] = 1;  // diagonal neighbour only
  CHECK_FALSE(is_single_component(f, 16, 16, Connectivity::kFour));
  CHECK(is_single_component(f, 16, 16, Connectivity::kEight));
}

TEST_CASE("mask files: phantom truth round-trips, errors are typed") {
  const auto dir = oracle::scratch_dir("masks");
  const auto p = disk_phantom();
  write_mask_file(dir / "truth.pcm", p.truth.mask.mask);
  const auto loaded = load_external_masks(dir / "truth.pcm", p.series);
  CHECK(loaded.mask == p.truth.mask.mask);
  CHECK(loaded.source == MaskSource::kExternal);

  auto shorter = p.series;
  shorter.meta.num_frames = 11;
  shorter.magnitude = Volume<std::uint16_t>(shorter.meta.dims());
  shorter.phase = Volume<std::int16_t>(shorter.meta.dims());
  CHECK_THROWS_AS(load_external_masks(dir / "truth.pcm", shorter), GeometryError);

  write_mask_file(dir / "zero.pcm", Volume<std::uint8_t>(p.series.meta.dims()));
  const auto zero = load_external_masks(dir / "zero.pcm", p.series);
  for (auto v : zero.mask.data()) CHECK(v == 0);

  auto bytes = encode_mask(p.truth.mask.mask);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_mask(bytes), FormatError);
}

TEST_CASE("mask encoding round-trips random odd-sized volumes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto m = oracle::random_mask(seed, {1 + rng.below(4), 1 + rng.below(13), 1 + rng.below(13)});
    CHECK(decode_mask(encode_mask(m)) == m);
  }
}
