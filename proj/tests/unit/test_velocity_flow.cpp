#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pcflow/error.hpp"
#include "pcflow/flow.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/phantom.hpp"
#include "pcflow/velocity.hpp"

using namespace pcflow;

namespace {

PhaseContrastSeries uniform_series(std::int16_t p, std::uint16_t m, double venc, double r) {
  PhaseContrastSeries s;
  s.meta.venc_cm_s = venc;
  s.meta.rescale_factor = r;
  s.meta.pixel_spacing_row_mm = 1.0;
  s.meta.pixel_spacing_col_mm = 1.0;
  s.meta.frame_interval_s = 0.03;
  s.meta.rows = s.meta.cols = 16;
  s.meta.num_frames = 1;
  s.magnitude = Volume<std::uint16_t>(s.meta.dims(), m);
  s.phase = Volume<std::int16_t>(s.meta.dims(), p);
  return s;
}

}  // namespace

TEST_CASE("velocity: VENC=150, R=1, P=3, M=2 gives 0.4 pi cm/s") {
  const auto v = reconstruct_velocity(uniform_series(3, 2, 150.0, 1.0));
  CHECK(std::abs(v.values(0, 0, 0) - 0.4 * std::numbers::pi) <= 1e-12);
  CHECK(std::abs(v.values(0, 5, 7) - oracle::product_velocity(150.0, 1.0, 3.0, 2.0)) <= 1e-12);
}

TEST_CASE("velocity: P=0 gives 0 regardless of M, R, VENC") {
  for (auto [m, venc, r] : {std::tuple{65535, 10.0, 3.0}, std::tuple{1, 500.0, 0.001}}) {
    const auto v = reconstruct_velocity(uniform_series(0, static_cast<std::uint16_t>(m), venc, r));
    for (double x : v.values.data()) CHECK(x == 0.0);
  }
}

TEST_CASE("velocity: exactly linear in P and sign follows P") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = oracle::random_series(seed, 2, 16, 16);
    for (auto& p : s.phase.data()) p = static_cast<std::int16_t>(p / 4);
    auto doubled = s;
    for (auto& p : doubled.phase.data()) p = static_cast<std::int16_t>(2 * p);
    const auto v1 = reconstruct_velocity(s);
    const auto v2 = reconstruct_velocity(doubled);
    for (std::size_t i = 0; i < v1.values.size(); ++i) {
      CHECK(v2.values.data()[i] == 2.0 * v1.values.data()[i]);
      const int sp = (s.phase.data()[i] > 0) - (s.phase.data()[i] < 0);
      const int sv = (v1.values.data()[i] > 0) - (v1.values.data()[i] < 0);
      if (s.magnitude.data()[i] > 0) CHECK(sp == sv);
    }
  }
}

TEST_CASE("velocity: conventional mode maps phase_range to VENC") {
  VelocityOptions opt{VelocityFormula::kConventional, 4096.0};
  const auto v = reconstruct_velocity(uniform_series(2048, 77, 150.0, 1.0), opt);
  CHECK(v.values(0, 3, 3) == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(parse_velocity_formula("conventional") == VelocityFormula::kConventional);
  CHECK_THROWS_AS(parse_velocity_formula("bogus"), ConfigError);
}

TEST_CASE("velocity kernels: serial and OpenMP variants agree bitwise") {
  const auto s = oracle::random_series(42, 7, 33, 29);
  const auto n = s.phase.size();
  std::vector<double> a(n), b(n);
  kernels::velocity_product_serial(s.phase.data(), s.magnitude.data(), 0.123, a);
  kernels::velocity_product_parallel(s.phase.data(), s.magnitude.data(), 0.123, b);
  CHECK(a == b);
  kernels::velocity_linear_serial(s.phase.data(), 0.77, a);
  kernels::velocity_linear_parallel(s.phase.data(), 0.77, b);
  CHECK(a == b);

  const auto mask = oracle::random_mask(43, s.meta.dims());
  std::vector<double> ra(s.meta.num_frames), rb(s.meta.num_frames);
  kernels::masked_frame_sums_serial(a, mask.data(), s.meta.dims().frame_size(), 0.01, ra);
  kernels::masked_frame_sums_parallel(a, mask.data(), s.meta.dims().frame_size(), 0.01, rb);
  CHECK(ra == rb);
}

TEST_CASE("flow: all-zero mask gives an all-zero curve") {
  const auto s = oracle::random_series(5, 3, 16, 16);
  const auto v = reconstruct_velocity(s);
  const auto curve = compute_flow_curve(v, {Volume<std::uint8_t>(s.meta.dims()), MaskSource::kExternal});
  for (double q : curve.rates_ml_s) CHECK(q == 0.0);
}

TEST_CASE("flow: 4 pixels at 10 cm/s with a = 0.25 cm2 give 10 ml/s and 0.2 ml") {
  VelocityMap v;
  v.meta.pixel_spacing_row_mm = 5.0;
  v.meta.pixel_spacing_col_mm = 5.0;
  v.meta.frame_interval_s = 0.02;
  v.meta.rows = v.meta.cols = 16;
  v.meta.num_frames = 1;
  v.values = Volume<double>(v.meta.dims(), 10.0);
  SegmentationMask m{Volume<std::uint8_t>(v.meta.dims()), MaskSource::kExternal};
  m.mask(0, 1, 1) = m.mask(0, 1, 2) = m.mask(0, 2, 1) = m.mask(0, 2, 2) = 1;
  const auto curve = compute_flow_curve(v, m);
  CHECK(curve.pixel_area_cm2 == 0.25);
  CHECK(curve.rates_ml_s.at(0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(extract_parameters(curve).net_flow_ml == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("flow: curve matches the naive triple loop bitwise on random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    const auto s = oracle::random_series(seed, 1 + rng.below(5), 16, 16);
    const auto mask = oracle::random_mask(seed + 7, s.meta.dims(), rng.uniform());
    const auto v = reconstruct_velocity(s);
    const auto curve = compute_flow_curve(v, {mask, MaskSource::kExternal});
    CHECK(curve.rates_ml_s == oracle::naive_flow_rates(v.values, mask, s.meta.pixel_spacing_row_mm, s.meta.pixel_spacing_col_mm));
  }
}

TEST_CASE("flow: dimension mismatch is a GeometryError") {
  const auto s = oracle::random_series(1, 2, 16, 16);
  CHECK_THROWS_AS(compute_flow_curve(reconstruct_velocity(s), {Volume<std::uint8_t>({3, 16, 16}), MaskSource::kExternal}),
                  GeometryError);
}

TEST_CASE("flow parameters: hand-summed example") {
  FlowCurve c{{10, 50, 120, 80, 20, -5, -10, 0}, 0.03, 1.0};
  const auto p = extract_parameters(c);
  CHECK(p.peak_flow_ml_s == 120.0);
  CHECK(p.net_flow_ml == doctest::Approx(7.95).epsilon(1e-12));
  CHECK(p.forward_flow_ml == doctest::Approx(8.40).epsilon(1e-12));
  CHECK(p.backward_flow_ml == doctest::Approx(-0.45).epsilon(1e-12));
  CHECK(p.net_flow_ml == p.forward_flow_ml + p.backward_flow_ml);
}

TEST_CASE("flow parameters: zero, all-positive and empty curves") {
  const auto z = extract_parameters({{0, 0, 0}, 0.05, 1.0});
  CHECK(z.peak_flow_ml_s == 0.0);
  CHECK(z.net_flow_ml == 0.0);
  CHECK(z.forward_flow_ml == 0.0);
  CHECK(z.backward_flow_ml == 0.0);
  const auto pos = extract_parameters({{1, 2, 3}, 0.05, 1.0});
  CHECK(pos.backward_flow_ml == 0.0);
  CHECK(pos.net_flow_ml == pos.forward_flow_ml);
  CHECK_THROWS_AS(extract_parameters({{}, 0.05, 1.0}), EmptyInputError);
}

TEST_CASE("flow parameters: partition, sign and peak properties on random curves") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed);
    FlowCurve c;
    c.frame_interval_s = rng.uniform(0.005, 0.1);
    c.rates_ml_s.resize(1 + rng.below(60));
    for (auto& q : c.rates_ml_s) q = rng.uniform(-500.0, 800.0);
    const auto p = extract_parameters(c);
    CHECK(oracle::relative_error(p.forward_flow_ml + p.backward_flow_ml, p.net_flow_ml) <= 1e-9);
    CHECK(p.forward_flow_ml >= 0.0);
    CHECK(p.backward_flow_ml <= 0.0);
    CHECK(p.peak_flow_ml_s == *std::max_element(c.rates_ml_s.begin(), c.rates_ml_s.end()));
    CHECK(std::abs(p.net_flow_ml - oracle::naive_net_flow(c.rates_ml_s, c.frame_interval_s)) <=
          1e-9 * (std::abs(p.forward_flow_ml) + std::abs(p.backward_flow_ml)));
  }
}

TEST_CASE("flow: scaling velocities by c > 0 scales every parameter by c") {
  const auto s = oracle::random_series(9, 4, 16, 16);
  const auto mask = oracle::random_mask(10, s.meta.dims());
  auto v = reconstruct_velocity(s);
  const auto p1 = extract_parameters(compute_flow_curve(v, {mask, MaskSource::kExternal}));
  for (auto& x : v.values.data()) x *= 4.0;
  const auto p4 = extract_parameters(compute_flow_curve(v, {mask, MaskSource::kExternal}));
  CHECK(p4.peak_flow_ml_s == 4.0 * p1.peak_flow_ml_s);
  CHECK(p4.net_flow_ml == 4.0 * p1.net_flow_ml);
  CHECK(p4.forward_flow_ml == 4.0 * p1.forward_flow_ml);
  CHECK(p4.backward_flow_ml == 4.0 * p1.backward_flow_ml);
}

TEST_CASE("flow: adding a positive-velocity pixel to every frame never lowers net flow") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = oracle::random_series(seed, 3, 16, 16);
    auto mask = oracle::random_mask(seed + 50, s.meta.dims(), 0.3);
    const auto v = reconstruct_velocity(s);
    const double before = extract_parameters(compute_flow_curve(v, {mask, MaskSource::kExternal})).net_flow_ml;
    bool added = false;
    for (std::size_t i = 0; i < s.meta.dims().frame_size() && !added; ++i) {
      bool ok = true;
      for (std::size_t f = 0; f < 3; ++f) ok = ok && mask.frame(f)[i] == 0 && v.values.frame(f)[i] > 0.0;
      if (!ok) continue;
      for (std::size_t f = 0; f < 3; ++f) mask.frame(f)[i] = 1;
      added = true;
    }
    if (!added) continue;
    CHECK(extract_parameters(compute_flow_curve(v, {mask, MaskSource::kExternal})).net_flow_ml >= before);
  }
}

TEST_CASE("flow: constant Poiseuille phantom on a 0.05 cm grid gives 353.43 ml/s within 1%") {
  PhantomConfig c;
  c.vessel_radius_cm = 1.5;
  c.peak_velocity_cm_s = 100.0;
  c.venc_cm_s = 150.0;
  c.grid_spacing_mm = 0.5;
  c.image_size = 72;
  c.num_frames = 3;
  const auto ph = generate_phantom(c);
  const double analytic = 50.0 * std::numbers::pi * 1.5 * 1.5;
  CHECK(ph.truth.flow_rate_ml_s[0] == doctest::Approx(analytic).epsilon(1e-12));
  CHECK(analytic == doctest::Approx(353.43).epsilon(1e-5));
  const auto curve = compute_flow_curve(reconstruct_velocity(ph.series), ph.truth.mask);
  for (double q : curve.rates_ml_s) CHECK(oracle::relative_error(q, analytic) <= 0.01);
}
