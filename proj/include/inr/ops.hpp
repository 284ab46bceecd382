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

// Differentiable primitives. Every forward has an explicit backward; there is
// no tape. All functions are pure and deterministic.

#ifndef INR_OPS_HPP
#define INR_OPS_HPP

#include <vector>

#include "inr/tensor.hpp"

namespace inr {

enum class Mode { Train, Eval };

/// Same-size, stride-1, zero-padded convolution.
///
/// out[i,j,co] = bias[co] + sum over (a, b, ci) of w[a,b,ci,co] * x_pad[i+a, j+b, ci].
/// Each output element accumulates with fused multiply-adds starting from the
/// bias, in the fixed order a, then b, then ci, independent of vectorization.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvKernel<T>& kernel);

/// Gradients of sum(grad_out * conv2d_forward(x, kernel)). The weight and bias
/// gradients are returned in `kernel` (same layout as the forward kernel).
template <typename T>
struct ConvGrads {
  Tensor<T> input;
  ConvKernel<T> kernel;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const ConvKernel<T>& kernel,
                             bool need_input_grad = true);

/// Batch normalization over all H x W positions of each channel.
///
/// Train mode ignores `params.mu`/`params.var` and computes biased batch
/// statistics, which are returned in `stats`. Eval mode uses the frozen ones.
/// Both modes share one normalization routine, so an Eval pass with the
/// statistics captured by a Train pass reproduces it bit for bit.
template <typename T>
struct BnForward {
  Tensor<T> y;
  BnParams<T> stats;
};

template <typename T>
BnForward<T> batchnorm_forward(const Tensor<T>& x, const BnParams<T>& params, Mode mode);

template <typename T>
struct BnGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

/// Exact Train-mode gradient; the batch statistics are functions of x.
template <typename T>
BnGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const std::vector<T>& gamma, T eps);

struct Activation {
  enum class Kind { Relu, Sine };
  Kind kind = Kind::Relu;
  double omega = 1.0;

  static Activation relu() { return {Kind::Relu, 1.0}; }
  static Activation sine(double omega) { return {Kind::Sine, omega}; }
  bool operator==(const Activation&) const = default;
};

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation act);

/// ReLU's derivative at exactly 0 is taken as 0.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& grad_out, const Tensor<T>& x, Activation act);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape);

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const std::vector<T>& scale);

template <typename T>
struct ChannelScaleGrads {
  Tensor<T> input;
  std::vector<T> scale;
};

template <typename T>
ChannelScaleGrads<T> channel_scale_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const std::vector<T>& scale);

/// Mean squared error over all entries and its gradient 2 (pred - target) / numel.
template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);

}  // namespace inr

#endif  // INR_OPS_HPP
