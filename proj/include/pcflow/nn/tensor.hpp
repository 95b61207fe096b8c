#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcflow::nn {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Channel-major activation tensor for a single sample.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}

  void reset(Shape s) {
    shape = s;
    data.assign(s.size(), 0.0);
  }

  double* channel(std::size_t c) { return data.data() + c * shape.height * shape.width; }
  const double* channel(std::size_t c) const { return data.data() + c * shape.height * shape.width; }
};

}  // namespace pcflow::nn
