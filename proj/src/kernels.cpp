#include "pcflow/kernels.hpp"

#include <cassert>

namespace pcflow::kernels {

namespace {

inline double product_term(std::int16_t p, std::uint16_t m, double scale) {
  // |P*M| < 2^31, so the widened product is exact.
  return scale * (static_cast<double>(p) * static_cast<double>(m));
}

inline double frame_sum(const double* v, const std::uint8_t* s, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(s[i]) * v[i];
  return acc;
}

}  // namespace

void velocity_product_serial(std::span<const std::int16_t> phase, std::span<const std::uint16_t> magnitude,
                             double scale, std::span<double> out) {
  assert(phase.size() == magnitude.size() && phase.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = product_term(phase[i], magnitude[i], scale);
}

void velocity_product_parallel(std::span<const std::int16_t> phase, std::span<const std::uint16_t> magnitude,
                               double scale, std::span<double> out) {
  assert(phase.size() == magnitude.size() && phase.size() == out.size());
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = product_term(phase[i], magnitude[i], scale);
}

void velocity_linear_serial(std::span<const std::int16_t> phase, double scale, std::span<double> out) {
  assert(phase.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * static_cast<double>(phase[i]);
}

void velocity_linear_parallel(std::span<const std::int16_t> phase, double scale, std::span<double> out) {
  assert(phase.size() == out.size());
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = scale * static_cast<double>(phase[i]);
}

void masked_frame_sums_serial(std::span<const double> velocity, std::span<const std::uint8_t> mask,
                              std::size_t frame_size, double pixel_area, std::span<double> rates) {
  assert(velocity.size() == mask.size() && velocity.size() == frame_size * rates.size());
  for (std::size_t f = 0; f < rates.size(); ++f) {
    rates[f] = pixel_area * frame_sum(velocity.data() + f * frame_size, mask.data() + f * frame_size, frame_size);
  }
}

void masked_frame_sums_parallel(std::span<const double> velocity, std::span<const std::uint8_t> mask,
                                std::size_t frame_size, double pixel_area, std::span<double> rates) {
  assert(velocity.size() == mask.size() && velocity.size() == frame_size * rates.size());
  const auto frames = static_cast<std::ptrdiff_t>(rates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    rates[f] = pixel_area * frame_sum(velocity.data() + f * frame_size, mask.data() + f * frame_size, frame_size);
  }
}

}  // namespace pcflow::kernels
