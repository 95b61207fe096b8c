// Independent reference computations used by the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pcflow/flow.hpp"
#include "pcflow/nn/layers.hpp"
#include "pcflow/rng.hpp"
#include "pcflow/series.hpp"

namespace oracle {

// Scalar evaluation of (10 pi R / VENC) * P * M.
inline double product_velocity(double venc, double r, double p, double m) {
  return 10.0 * std::numbers::pi * r / venc * p * m;
}

// Direct triple loop over frames, rows and columns.
inline std::vector<double> naive_flow_rates(const pcflow::Volume<double>& v, const pcflow::Volume<std::uint8_t>& s,
                                            double row_mm, double col_mm) {
  const double a = (row_mm / 10.0) * (col_mm / 10.0);
  const auto d = v.dims();
  std::vector<double> rates(d.frames);
  for (std::size_t n = 0; n < d.frames; ++n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d.rows; ++r)
      for (std::size_t c = 0; c < d.cols; ++c) acc += static_cast<double>(s(n, r, c)) * v(n, r, c);
    rates[n] = a * acc;
  }
  return rates;
}

inline double naive_net_flow(const std::vector<double>& rates, double dt) {
  double net = 0.0;
  for (double q : rates) net += q * dt;
  return net;
}

inline double relative_error(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

// Random valid series with small dimensions.
inline pcflow::PhaseContrastSeries random_series(std::uint64_t seed, std::size_t frames, std::size_t rows,
                                                 std::size_t cols) {
  pcflow::Rng rng(seed);
  pcflow::PhaseContrastSeries s;
  s.meta.venc_cm_s = rng.uniform(50.0, 400.0);
  s.meta.rescale_factor = rng.uniform(0.01, 3.0);
  s.meta.pixel_spacing_row_mm = rng.uniform(0.5, 3.0);
  s.meta.pixel_spacing_col_mm = rng.uniform(0.5, 3.0);
  s.meta.frame_interval_s = rng.uniform(0.01, 0.06);
  s.meta.rows = rows;
  s.meta.cols = cols;
  s.meta.num_frames = frames;
  s.meta.series_id = "rand" + std::to_string(seed);
  s.meta.vendor_tag = "test vendor";
  s.magnitude = pcflow::Volume<std::uint16_t>({frames, rows, cols});
  s.phase = pcflow::Volume<std::int16_t>({frames, rows, cols});
  for (auto& m : s.magnitude.data()) m = static_cast<std::uint16_t>(rng.below(65536));
  for (auto& p : s.phase.data()) p = static_cast<std::int16_t>(static_cast<int>(rng.below(65536)) - 32768);
  return s;
}

inline pcflow::Volume<std::uint8_t> random_mask(std::uint64_t seed, pcflow::Dims dims, double p = 0.5) {
  pcflow::Rng rng(seed);
  pcflow::Volume<std::uint8_t> m(dims);
  for (auto& v : m.data()) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

// Worst relative error between analytic and central-difference gradients of
// L = sum_j w_j * out_j, over both parameters and inputs.
struct GradientCheck {
  double max_param_error = 0.0;
  double max_input_error = 0.0;
};

inline double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

inline GradientCheck check_layer_gradients(pcflow::nn::Layer& layer, pcflow::nn::Shape in_shape, std::uint64_t seed,
                                           double step = 1e-6) {
  using namespace pcflow::nn;
  pcflow::Rng rng(seed);
  layer.initialize(rng);
  Tensor input(in_shape);
  // Keep inputs away from ReLU kinks and pooling ties.
  for (auto& x : input.data) {
    double v = rng.uniform(-1.0, 1.0);
    if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
    x = v;
  }
  const Shape out_shape = layer.output_shape(in_shape);
  std::vector<double> w(out_shape.size());
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);

  auto loss = [&](const Tensor& in) {
    Tensor out(out_shape);
    layer.forward(in, out);
    double l = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) l += w[i] * out.data[i];
    return l;
  };

  Tensor out(out_shape);
  layer.forward(input, out);
  Tensor grad_out(out_shape);
  grad_out.data = w;
  Tensor grad_in(in_shape);
  std::vector<double> param_grad(layer.params().size(), 0.0);
  layer.backward(input, out, grad_out, grad_in, param_grad);

  GradientCheck result;
  auto params = layer.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double lp = loss(input);
    params[i] = saved - step;
    const double lm = loss(input);
    params[i] = saved;
    result.max_param_error =
        std::max(result.max_param_error, gradient_relative_error(param_grad[i], (lp - lm) / (2.0 * step)));
  }
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const double saved = input.data[i];
    input.data[i] = saved + step;
    const double lp = loss(input);
    input.data[i] = saved - step;
    const double lm = loss(input);
    input.data[i] = saved;
    result.max_input_error =
        std::max(result.max_input_error, gradient_relative_error(grad_in.data[i], (lp - lm) / (2.0 * step)));
  }
  return result;
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pcflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
