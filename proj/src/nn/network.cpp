#include "pcflow/nn/network.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcflow/error.hpp"

namespace pcflow::nn {

Network::Network(Shape input, std::vector<std::unique_ptr<Layer>> layers)
    : input_(input), layers_(std::move(layers)) {
  Shape s = input_;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  compute_offsets();
}

Network::Network(const Network& other) : input_(other.input_), offsets_(other.offsets_) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Network::compute_offsets() {
  offsets_.assign(1, 0);
  for (const auto& layer : layers_) offsets_.push_back(offsets_.back() + layer->params().size());
}

Shape Network::output_shape() const {
  Shape s = input_;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : layers_) layer->initialize(rng);
}

std::span<const double> Network::forward(const Tensor& input, Workspace& ws) const {
  if (input.shape != input_) {
    throw GeometryError(fmt::format("network expects {}x{}x{} input, got {}x{}x{}", input_.channels, input_.height,
                                    input_.width, input.shape.channels, input.shape.height, input.shape.width));
  }
  ws.activations.resize(layers_.size() + 1);
  ws.activations[0] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(ws.activations[i], ws.activations[i + 1]);
  return ws.activations.back().data;
}

void Network::backward(Workspace& ws, std::span<const double> grad_output, std::span<double> param_grad) const {
  if (param_grad.size() != parameter_count()) throw GeometryError("gradient buffer size mismatch");
  Tensor* upstream = &ws.grad_a;
  Tensor* downstream = &ws.grad_b;
  upstream->reset(ws.activations.back().shape);
  std::copy(grad_output.begin(), grad_output.end(), upstream->data.begin());
  for (std::size_t i = layers_.size(); i-- > 0;) {
    auto grads = param_grad.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    layers_[i]->backward(ws.activations[i], ws.activations[i + 1], *upstream, *downstream, grads);
    std::swap(upstream, downstream);
  }
  if (upstream != &ws.grad_a) std::swap(ws.grad_a, ws.grad_b);
}

const Tensor& Network::input_gradient(const Workspace& ws) const { return ws.grad_a; }

std::vector<double> Network::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) out.insert(out.end(), layer->params().begin(), layer->params().end());
  return out;
}

void Network::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw GeometryError("parameter vector size mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto dst = layers_[i]->params();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offsets_[i]), dst.size(), dst.begin());
  }
}

double loss_and_gradient(Head head, std::span<const double> logits, std::size_t label, std::span<double> grad) {
  if (head == Head::kSigmoid) {
    if (logits.size() != 1 || label > 1) throw GeometryError("sigmoid head takes one logit and a 0/1 label");
    const double z = logits[0];
    const double y = static_cast<double>(label);
    const double p = 1.0 / (1.0 + std::exp(-z));
    grad[0] = p - y;
    // log(1 + e^z) - y z, written to avoid overflow.
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  if (label >= logits.size()) throw GeometryError("label outside the softmax classes");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  for (double z : logits) norm += std::exp(z - zmax);
  const double log_norm = std::log(norm) + zmax;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    grad[k] = std::exp(logits[k] - log_norm) - (k == label ? 1.0 : 0.0);
  }
  return log_norm - logits[label];
}

std::vector<double> class_probabilities(Head head, std::span<const double> logits) {
  if (head == Head::kSigmoid) {
    const double p = 1.0 / (1.0 + std::exp(-logits[0]));
    return {1.0 - p, p};
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - zmax);
    norm += p[k];
  }
  for (double& v : p) v /= norm;
  return p;
}

}  // namespace pcflow::nn
