#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcflow {

struct Dims {
  std::size_t frames = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t frame_size() const { return rows * cols; }
  std::size_t size() const { return frames * rows * cols; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Dense frame-major, row-major 3-D array [frame][row][col].
template <typename T>
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims dims, T fill = T{}) : dims_(dims), data_(dims.size(), fill) {}

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t f, std::size_t r, std::size_t c) {
    return data_[(f * dims_.rows + r) * dims_.cols + c];
  }
  const T& operator()(std::size_t f, std::size_t r, std::size_t c) const {
    return data_[(f * dims_.rows + r) * dims_.cols + c];
  }

  std::span<T> frame(std::size_t f) {
    return std::span<T>(data_).subspan(f * dims_.frame_size(), dims_.frame_size());
  }
  std::span<const T> frame(std::size_t f) const {
    return std::span<const T>(data_).subspan(f * dims_.frame_size(), dims_.frame_size());
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

}  // namespace pcflow
