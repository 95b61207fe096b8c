#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pcflow/nn/layers.hpp"
#include "pcflow/nn/tensor.hpp"

namespace pcflow::nn {

// Per-sample scratch space. One workspace per concurrently processed sample.
struct Workspace {
  std::vector<Tensor> activations;  // activations[0] is the input
  Tensor grad_a;
  Tensor grad_b;
};

class Network {
 public:
  Network() = default;
  Network(Shape input, std::vector<std::unique_ptr<Layer>> layers);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_; }
  Shape output_shape() const;
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  std::size_t parameter_count() const { return offsets_.back(); }
  // Offset of layer i's parameters within a flat gradient vector.
  std::size_t parameter_offset(std::size_t i) const { return offsets_[i]; }

  void initialize(std::uint64_t seed);

  std::span<const double> forward(const Tensor& input, Workspace& ws) const;
  // Back-propagates dL/d(output) through the activations left in `ws` by the
  // last forward call, adding parameter gradients into `param_grad`.
  void backward(Workspace& ws, std::span<const double> grad_output, std::span<double> param_grad) const;
  // dL/d(input) from the last backward call.
  const Tensor& input_gradient(const Workspace& ws) const;

  // Flat copies in layer order.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

 private:
  void compute_offsets();

  Shape input_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> offsets_{0};
};

enum class Head : std::uint32_t {
  kSoftmax = 1,  // multi-class cross-entropy
  kSigmoid = 2,  // single logit, binary cross-entropy
};

// Loss for one sample; writes dL/d(logits) into grad (same size as logits).
double loss_and_gradient(Head head, std::span<const double> logits, std::size_t label, std::span<double> grad);

// Class probabilities; a sigmoid head yields {1 - p, p}.
std::vector<double> class_probabilities(Head head, std::span<const double> logits);

}  // namespace pcflow::nn
