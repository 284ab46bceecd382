// Copyright 2026 The Conv-INR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "inr/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace inr {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

template <typename T>
Tensor<T>::Tensor(std::size_t height, std::size_t width, std::size_t channels, T fill)
    : shape_{height, width, channels}, data_(height * width * channels, fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
ConvKernel<T> ConvKernel<T>::zeros(std::size_t k, std::size_t cin, std::size_t cout) {
  ConvKernel out{k, cin, cout, std::vector<T>(k * k * cin * cout, T(0)), std::vector<T>(cout, T(0))};
  out.validate();
  return out;
}

template <typename T>
void ConvKernel<T>::validate() const {
  if (k % 2 == 0) throw ShapeError("kernel size must be odd, got " + std::to_string(k));
  if (cin == 0 || cout == 0) throw ShapeError("kernel channel counts must be positive");
  if (weights.size() != k * k * cin * cout) throw ShapeError("kernel weight length does not match k*k*cin*cout");
  if (bias.size() != cout) throw ShapeError("kernel bias length does not match cout");
}

template <typename T>
BnParams<T> BnParams<T>::identity(std::size_t channels, T eps) {
  return {std::vector<T>(channels, T(1)), std::vector<T>(channels, T(0)), std::vector<T>(channels, T(0)),
          std::vector<T>(channels, T(1) - eps), eps};
}

template <typename T>
void BnParams<T>::validate() const {
  const auto c = gamma.size();
  if (beta.size() != c || mu.size() != c || var.size() != c) throw ShapeError("batch-norm arrays differ in length");
  if (!(eps > T(0))) throw ShapeError("batch-norm eps must be positive");
  for (T v : var) {
    if (v < T(0)) throw ShapeError("batch-norm variance must be non-negative");
  }
}

template <typename T>
Tensor<T> center_crop(const Tensor<T>& x, std::size_t height, std::size_t width) {
  if (height > x.height() || width > x.width() || height == 0 || width == 0) {
    throw ShapeError("cannot center-crop " + x.shape().str() + " to " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  const std::size_t top = (x.height() - height) / 2;
  const std::size_t left = (x.width() - width) / 2;
  Tensor<T> out(height, width, x.channels());
  for (std::size_t i = 0; i < height; ++i) {
    std::copy_n(x.pixel(top + i, left), width * x.channels(), out.pixel(i, 0));
  }
  return out;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (std::size_t n = 0; n < a.numel(); ++n) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[n]) - static_cast<double>(b.data()[n])));
  }
  return m;
}

#define INR_INSTANTIATE(T)                                                          \
  template class Tensor<T>;                                                         \
  template struct ConvKernel<T>;                                                    \
  template struct BnParams<T>;                                                      \
  template Tensor<T> center_crop(const Tensor<T>&, std::size_t, std::size_t);       \
  template double max_abs_diff(const Tensor<T>&, const Tensor<T>&);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

}  // namespace inr
