#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcflow/nn/tensor.hpp"
#include "pcflow/rng.hpp"

namespace pcflow::nn {

enum class LayerKind : std::uint32_t { kConv2d = 1, kRelu = 2, kMaxPool = 3, kAvgPool = 4, kDense = 5 };

// Layers are stateless apart from their parameters: forward and backward are
// const, so one network can serve many samples concurrently.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual void forward(const Tensor& in, Tensor& out) const = 0;
  // Writes dL/d(in) into grad_in and adds dL/d(params) into param_grad.
  virtual void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                        std::span<double> param_grad) const = 0;
  // Hyperparameters stored in checkpoints.
  virtual std::vector<std::uint32_t> config() const = 0;
  virtual void initialize(Rng& /*rng*/) {}
  virtual std::unique_ptr<Layer> clone() const = 0;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

 protected:
  std::vector<double> params_;
};

// 2-D convolution, stride 1, zero padding. Parameters: weights[out][in][k][k], then bias[out].
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3, std::size_t padding = 1);

  LayerKind kind() const override { return LayerKind::kConv2d; }
  std::string describe() const override;
  Shape output_shape(const Shape& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad) const override;
  std::vector<std::uint32_t> config() const override;
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  std::size_t in_;
  std::size_t out_;
  std::size_t kernel_;
  std::size_t padding_;
};

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  std::string describe() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad) const override;
  std::vector<std::uint32_t> config() const override { return {}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

// Non-overlapping window pooling; trailing rows/cols that do not fill a window are dropped.
class MaxPool final : public Layer {
 public:
  explicit MaxPool(std::size_t window) : window_(window) {}

  LayerKind kind() const override { return LayerKind::kMaxPool; }
  std::string describe() const override;
  Shape output_shape(const Shape& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad) const override;
  std::vector<std::uint32_t> config() const override { return {static_cast<std::uint32_t>(window_)}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }

 private:
  std::size_t window_;
};

class AvgPool final : public Layer {
 public:
  explicit AvgPool(std::size_t window) : window_(window) {}

  LayerKind kind() const override { return LayerKind::kAvgPool; }
  std::string describe() const override;
  Shape output_shape(const Shape& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad) const override;
  std::vector<std::uint32_t> config() const override { return {static_cast<std::uint32_t>(window_)}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool>(*this); }

 private:
  std::size_t window_;
};

// Fully connected over the flattened input. Parameters: weights[out][in], then bias[out].
class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::kDense; }
  std::string describe() const override;
  Shape output_shape(const Shape& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad) const override;
  std::vector<std::uint32_t> config() const override;
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  std::size_t in_;
  std::size_t out_;
};

std::unique_ptr<Layer> make_layer(LayerKind kind, std::span<const std::uint32_t> config);

}  // namespace pcflow::nn
