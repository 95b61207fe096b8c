#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// variant; the two produce bitwise-identical output because parallelism is
// only over independent elements or whole frames, never inside a reduction.
namespace pcflow::kernels {

// out[i] = scale * (P[i] * M[i])
void velocity_product_serial(std::span<const std::int16_t> phase, std::span<const std::uint16_t> magnitude,
                             double scale, std::span<double> out);
void velocity_product_parallel(std::span<const std::int16_t> phase, std::span<const std::uint16_t> magnitude,
                               double scale, std::span<double> out);

// out[i] = scale * P[i]
void velocity_linear_serial(std::span<const std::int16_t> phase, double scale, std::span<double> out);
void velocity_linear_parallel(std::span<const std::int16_t> phase, double scale, std::span<double> out);

// rates[n] = pixel_area * sum_i mask[n,i] * velocity[n,i], summed in row-major pixel order.
void masked_frame_sums_serial(std::span<const double> velocity, std::span<const std::uint8_t> mask,
                              std::size_t frame_size, double pixel_area, std::span<double> rates);
void masked_frame_sums_parallel(std::span<const double> velocity, std::span<const std::uint8_t> mask,
                                std::size_t frame_size, double pixel_area, std::span<double> rates);

}  // namespace pcflow::kernels
