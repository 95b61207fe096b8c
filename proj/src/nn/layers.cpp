#include "pcflow/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcflow/error.hpp"

namespace pcflow::nn {

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), padding_(padding) {
  if (in_ == 0 || out_ == 0 || kernel_ == 0) throw ConfigError("conv2d dimensions must be positive");
  params_.assign(out_ * in_ * kernel_ * kernel_ + out_, 0.0);
}

std::string Conv2d::describe() const {
  return fmt::format("conv2d {}->{} k{} p{}", in_, out_, kernel_, padding_);
}

Shape Conv2d::output_shape(const Shape& in) const {
  if (in.channels != in_) throw GeometryError(fmt::format("conv2d expects {} channels, got {}", in_, in.channels));
  if (in.height + 2 * padding_ < kernel_ || in.width + 2 * padding_ < kernel_) {
    throw GeometryError("conv2d input smaller than kernel");
  }
  return {out_, in.height + 2 * padding_ - kernel_ + 1, in.width + 2 * padding_ - kernel_ + 1};
}

namespace {

// Output index range [lo, hi) for which out + k - pad lands inside [0, n).
struct Range {
  std::size_t lo;
  std::size_t hi;
};

Range valid_range(std::size_t out_size, std::size_t in_size, std::size_t k, std::size_t pad) {
  const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_size), static_cast<std::ptrdiff_t>(in_size) - shift);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

}  // namespace

void Conv2d::forward(const Tensor& in, Tensor& out) const {
  const Shape os = output_shape(in.shape);
  out.reset(os);
  const std::size_t ih = in.shape.height;
  const std::size_t iw = in.shape.width;
  const double* weights = params_.data();
  const double* bias = params_.data() + out_ * in_ * kernel_ * kernel_;
  for (std::size_t oc = 0; oc < out_; ++oc) {
    double* dst = out.channel(oc);
    std::fill(dst, dst + os.height * os.width, bias[oc]);
    for (std::size_t ic = 0; ic < in_; ++ic) {
      const double* src = in.channel(ic);
      for (std::size_t ky = 0; ky < kernel_; ++ky) {
        const Range ry = valid_range(os.height, ih, ky, padding_);
        for (std::size_t kx = 0; kx < kernel_; ++kx) {
          const Range rx = valid_range(os.width, iw, kx, padding_);
          const double w = weights[((oc * in_ + ic) * kernel_ + ky) * kernel_ + kx];
          for (std::size_t y = ry.lo; y < ry.hi; ++y) {
            double* drow = dst + y * os.width;
            const double* srow = src + (y + ky - padding_) * iw;
            for (std::size_t x = rx.lo; x < rx.hi; ++x) drow[x] += w * srow[x + kx - padding_];
          }
        }
      }
    }
  }
}

void Conv2d::backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                      std::span<double> param_grad) const {
  const Shape os = out.shape;
  const std::size_t ih = in.shape.height;
  const std::size_t iw = in.shape.width;
  grad_in.reset(in.shape);
  const double* weights = params_.data();
  double* gw = param_grad.data();
  double* gb = param_grad.data() + out_ * in_ * kernel_ * kernel_;
  for (std::size_t oc = 0; oc < out_; ++oc) {
    const double* g = grad_out.channel(oc);
    double sum = 0.0;
    for (std::size_t i = 0; i < os.height * os.width; ++i) sum += g[i];
    gb[oc] += sum;
    for (std::size_t ic = 0; ic < in_; ++ic) {
      const double* src = in.channel(ic);
      double* gsrc = grad_in.channel(ic);
      for (std::size_t ky = 0; ky < kernel_; ++ky) {
        const Range ry = valid_range(os.height, ih, ky, padding_);
        for (std::size_t kx = 0; kx < kernel_; ++kx) {
          const Range rx = valid_range(os.width, iw, kx, padding_);
          const std::size_t widx = ((oc * in_ + ic) * kernel_ + ky) * kernel_ + kx;
          const double w = weights[widx];
          double acc = 0.0;
          for (std::size_t y = ry.lo; y < ry.hi; ++y) {
            const double* grow = g + y * os.width;
            const std::size_t offset = (y + ky - padding_) * iw;
            const double* srow = src + offset;
            double* gsrow = gsrc + offset;
            for (std::size_t x = rx.lo; x < rx.hi; ++x) {
              acc += grow[x] * srow[x + kx - padding_];
              gsrow[x + kx - padding_] += w * grow[x];
            }
          }
          gw[widx] += acc;
        }
      }
    }
  }
}

std::vector<std::uint32_t> Conv2d::config() const {
  return {static_cast<std::uint32_t>(in_), static_cast<std::uint32_t>(out_), static_cast<std::uint32_t>(kernel_),
          static_cast<std::uint32_t>(padding_)};
}

void Conv2d::initialize(Rng& rng) {
  const double sigma = std::sqrt(2.0 / static_cast<double>(in_ * kernel_ * kernel_));
  const std::size_t n_weights = out_ * in_ * kernel_ * kernel_;
  for (std::size_t i = 0; i < n_weights; ++i) params_[i] = rng.normal(0.0, sigma);
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(n_weights), params_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Relu

void Relu::forward(const Tensor& in, Tensor& out) const {
  out.reset(in.shape);
  for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
}

void Relu::backward(const Tensor& in, const Tensor& /*out*/, const Tensor& grad_out, Tensor& grad_in,
                    std::span<double> /*param_grad*/) const {
  grad_in.reset(in.shape);
  for (std::size_t i = 0; i < in.data.size(); ++i) grad_in.data[i] = in.data[i] > 0.0 ? grad_out.data[i] : 0.0;
}

// ---------------------------------------------------------------------------
// Pooling

namespace {

Shape pooled_shape(const Shape& in, std::size_t window) {
  if (window == 0 || in.height < window || in.width < window) {
    throw GeometryError(fmt::format("pool window {} does not fit {}x{}", window, in.height, in.width));
  }
  return {in.channels, in.height / window, in.width / window};
}

}  // namespace

std::string MaxPool::describe() const { return fmt::format("maxpool {}", window_); }

Shape MaxPool::output_shape(const Shape& in) const { return pooled_shape(in, window_); }

void MaxPool::forward(const Tensor& in, Tensor& out) const {
  const Shape os = output_shape(in.shape);
  out.reset(os);
  const std::size_t iw = in.shape.width;
  for (std::size_t c = 0; c < os.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        double best = src[(y * window_) * iw + x * window_];
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) {
            best = std::max(best, src[(y * window_ + dy) * iw + x * window_ + dx]);
          }
        }
        dst[y * os.width + x] = best;
      }
    }
  }
}

void MaxPool::backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                       std::span<double> /*param_grad*/) const {
  const Shape os = out.shape;
  grad_in.reset(in.shape);
  const std::size_t iw = in.shape.width;
  for (std::size_t c = 0; c < os.channels; ++c) {
    const double* src = in.channel(c);
    double* gsrc = grad_in.channel(c);
    const double* o = out.channel(c);
    const double* g = grad_out.channel(c);
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        // Route to the first maximum in scan order.
        const double best = o[y * os.width + x];
        bool done = false;
        for (std::size_t dy = 0; dy < window_ && !done; ++dy) {
          for (std::size_t dx = 0; dx < window_ && !done; ++dx) {
            const std::size_t idx = (y * window_ + dy) * iw + x * window_ + dx;
            if (src[idx] == best) {
              gsrc[idx] += g[y * os.width + x];
              done = true;
            }
          }
        }
      }
    }
  }
}

std::string AvgPool::describe() const { return fmt::format("avgpool {}", window_); }

Shape AvgPool::output_shape(const Shape& in) const { return pooled_shape(in, window_); }

void AvgPool::forward(const Tensor& in, Tensor& out) const {
  const Shape os = output_shape(in.shape);
  out.reset(os);
  const std::size_t iw = in.shape.width;
  const double norm = 1.0 / static_cast<double>(window_ * window_);
  for (std::size_t c = 0; c < os.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        double sum = 0.0;
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) sum += src[(y * window_ + dy) * iw + x * window_ + dx];
        }
        dst[y * os.width + x] = sum * norm;
      }
    }
  }
}

void AvgPool::backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                       std::span<double> /*param_grad*/) const {
  const Shape os = out.shape;
  grad_in.reset(in.shape);
  const std::size_t iw = in.shape.width;
  const double norm = 1.0 / static_cast<double>(window_ * window_);
  for (std::size_t c = 0; c < os.channels; ++c) {
    double* gsrc = grad_in.channel(c);
    const double* g = grad_out.channel(c);
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        const double share = g[y * os.width + x] * norm;
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) gsrc[(y * window_ + dy) * iw + x * window_ + dx] += share;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in_features, std::size_t out_features) : in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ConfigError("dense dimensions must be positive");
  params_.assign(out_ * in_ + out_, 0.0);
}

std::string Dense::describe() const { return fmt::format("dense {}->{}", in_, out_); }

Shape Dense::output_shape(const Shape& in) const {
  if (in.size() != in_) throw GeometryError(fmt::format("dense expects {} inputs, got {}", in_, in.size()));
  return {out_, 1, 1};
}

void Dense::forward(const Tensor& in, Tensor& out) const {
  out.reset(output_shape(in.shape));
  const double* bias = params_.data() + out_ * in_;
  for (std::size_t o = 0; o < out_; ++o) {
    const double* w = params_.data() + o * in_;
    double acc = bias[o];
    for (std::size_t i = 0; i < in_; ++i) acc += w[i] * in.data[i];
    out.data[o] = acc;
  }
}

void Dense::backward(const Tensor& in, const Tensor& /*out*/, const Tensor& grad_out, Tensor& grad_in,
                     std::span<double> param_grad) const {
  grad_in.reset(in.shape);
  double* gb = param_grad.data() + out_ * in_;
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = grad_out.data[o];
    const double* w = params_.data() + o * in_;
    double* gw = param_grad.data() + o * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      gw[i] += g * in.data[i];
      grad_in.data[i] += g * w[i];
    }
    gb[o] += g;
  }
}

std::vector<std::uint32_t> Dense::config() const {
  return {static_cast<std::uint32_t>(in_), static_cast<std::uint32_t>(out_)};
}

void Dense::initialize(Rng& rng) {
  const double sigma = std::sqrt(2.0 / static_cast<double>(in_));
  for (std::size_t i = 0; i < out_ * in_; ++i) params_[i] = rng.normal(0.0, sigma);
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(out_ * in_), params_.end(), 0.0);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Layer> make_layer(LayerKind kind, std::span<const std::uint32_t> config) {
  auto need = [&](std::size_t n) {
    if (config.size() != n) {
      throw FormatError(fmt::format("layer kind {} expects {} config values, got {}", static_cast<std::uint32_t>(kind),
                                    n, config.size()));
    }
  };
  switch (kind) {
    case LayerKind::kConv2d:
      need(4);
      return std::make_unique<Conv2d>(config[0], config[1], config[2], config[3]);
    case LayerKind::kRelu:
      need(0);
      return std::make_unique<Relu>();
    case LayerKind::kMaxPool:
      need(1);
      return std::make_unique<MaxPool>(config[0]);
    case LayerKind::kAvgPool:
      need(1);
      return std::make_unique<AvgPool>(config[0]);
    case LayerKind::kDense:
      need(2);
      return std::make_unique<Dense>(config[0], config[1]);
  }
  throw FormatError(fmt::format("unknown layer kind {}", static_cast<std::uint32_t>(kind)));
}

}  // namespace pcflow::nn
