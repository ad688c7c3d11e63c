#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dvk/cnn/architecture.hpp"

namespace dvk::cnn {

// Batch of activations in NCHW order.
template <typename Real>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(int batch, const TensorShape& s, Real fill = Real(0))
      : n(batch), c(s.channels), h(s.height), w(s.width),
        data(static_cast<std::size_t>(batch) * s.channels * s.height * s.width, fill) {}

  TensorShape shape() const { return {h, w, c}; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::span<Real> sample(int i) { return {data.data() + i * sample_size(), sample_size()}; }
  std::span<const Real> sample(int i) const { return {data.data() + i * sample_size(), sample_size()}; }
  Real& at(int b, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
  }
  Real at(int b, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
  }
};

}  // namespace dvk::cnn
