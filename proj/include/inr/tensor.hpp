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

#ifndef INR_TENSOR_HPP
#define INR_TENSOR_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, channel counts or invalid hyperparameters.
class ShapeError : public Error {
 public:
  using Error::Error;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t numel() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense H x W x C array, row-major with the channel index innermost.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t height, std::size_t width, std::size_t channels, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor like(const Tensor& other, T fill = T(0)) { return Tensor(other.height(), other.width(), other.channels(), fill); }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t numel() const { return data_.size(); }
  std::size_t pixels() const { return shape_.height * shape_.width; }
  const Shape& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t c) { return data_[(i * shape_.width + j) * shape_.channels + c]; }
  T operator()(std::size_t i, std::size_t j, std::size_t c) const { return data_[(i * shape_.width + j) * shape_.channels + c]; }

  T* pixel(std::size_t i, std::size_t j) { return data_.data() + (i * shape_.width + j) * shape_.channels; }
  const T* pixel(std::size_t i, std::size_t j) const { return data_.data() + (i * shape_.width + j) * shape_.channels; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v);
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// K x K x Cin x Cout weights (Cout innermost) plus one bias per output channel.
template <typename T>
struct ConvKernel {
  std::size_t k = 1;
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  static ConvKernel zeros(std::size_t k, std::size_t cin, std::size_t cout);

  T& w(std::size_t a, std::size_t b, std::size_t ci, std::size_t co) { return weights[((a * k + b) * cin + ci) * cout + co]; }
  T w(std::size_t a, std::size_t b, std::size_t ci, std::size_t co) const { return weights[((a * k + b) * cin + ci) * cout + co]; }

  std::size_t parameter_count() const { return weights.size() + bias.size(); }
  /// Throws ShapeError when k is even or the array lengths disagree with (k, cin, cout).
  void validate() const;

  template <typename U>
  ConvKernel<U> cast() const {
    return {k, cin, cout, std::vector<U>(weights.begin(), weights.end()), std::vector<U>(bias.begin(), bias.end())};
  }

  bool operator==(const ConvKernel&) const = default;
};

/// Per-channel batch-norm affine parameters and (frozen) statistics.
template <typename T>
struct BnParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> mu;
  std::vector<T> var;
  T eps = T(1e-5);

  /// gamma = 1, beta = 0, mu = 0, var = 1 - eps: the exact identity map in Eval mode.
  static BnParams identity(std::size_t channels, T eps = T(1e-5));

  std::size_t channels() const { return gamma.size(); }
  void validate() const;

  template <typename U>
  BnParams<U> cast() const {
    return {std::vector<U>(gamma.begin(), gamma.end()), std::vector<U>(beta.begin(), beta.end()),
            std::vector<U>(mu.begin(), mu.end()), std::vector<U>(var.begin(), var.end()), U(eps)};
  }

  bool operator==(const BnParams&) const = default;
};

template <typename T>
Tensor<T> center_crop(const Tensor<T>& x, std::size_t height, std::size_t width);

/// Largest absolute elementwise difference; throws ShapeError on shape mismatch.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace inr

#endif  // INR_TENSOR_HPP
