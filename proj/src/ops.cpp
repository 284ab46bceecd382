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

#include "inr/ops.hpp"

#include <cmath>

namespace inr {
namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

// Biased per-channel statistics, two passes, double accumulation.
template <typename T>
void channel_stats(const Tensor<T>& x, std::vector<T>& mu, std::vector<T>& var) {
  const std::size_t c = x.channels();
  const std::size_t n = x.pixels();
  std::vector<double> sum(c, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const T* px = x.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += px[ch];
  }
  std::vector<double> mean(c);
  for (std::size_t ch = 0; ch < c; ++ch) mean[ch] = sum[ch] / static_cast<double>(n);
  std::vector<double> sq(c, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const T* px = x.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = px[ch] - mean[ch];
      sq[ch] += d * d;
    }
  }
  mu.resize(c);
  var.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    mu[ch] = static_cast<T>(mean[ch]);
    var[ch] = static_cast<T>(sq[ch] / static_cast<double>(n));
  }
}

template <typename T>
std::vector<T> inv_std(const std::vector<T>& var, T eps) {
  std::vector<T> out(var.size());
  for (std::size_t c = 0; c < var.size(); ++c) out[c] = T(1) / std::sqrt(var[c] + eps);
  return out;
}

}  // namespace

template <typename T>
BnForward<T> batchnorm_forward(const Tensor<T>& x, const BnParams<T>& params, Mode mode) {
  if (x.pixels() == 0) throw ShapeError("batchnorm: zero spatial size");
  const std::size_t c = x.channels();
  if (params.gamma.size() != c || params.beta.size() != c) throw ShapeError("batchnorm: channel mismatch");
  if (!(params.eps > T(0))) throw ShapeError("batchnorm: eps must be positive");

  BnForward<T> out;
  out.stats = params;
  if (mode == Mode::Train) {
    channel_stats(x, out.stats.mu, out.stats.var);
  } else if (params.mu.size() != c || params.var.size() != c) {
    throw ShapeError("batchnorm: Eval mode needs frozen statistics for every channel");
  }

  const std::vector<T> inv = inv_std(out.stats.var, params.eps);
  out.y = Tensor<T>::like(x);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    const T* px = x.data() + p * c;
    T* py = out.y.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      py[ch] = params.gamma[ch] * ((px[ch] - out.stats.mu[ch]) * inv[ch]) + params.beta[ch];
    }
  }
  return out;
}

template <typename T>
BnGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const std::vector<T>& gamma, T eps) {
  require_same_shape(grad_out.shape(), x.shape(), "batchnorm_backward");
  const std::size_t c = x.channels();
  if (gamma.size() != c) throw ShapeError("batchnorm_backward: gamma length does not match channels");
  if (x.pixels() == 0) throw ShapeError("batchnorm_backward: zero spatial size");

  std::vector<T> mu, var;
  channel_stats(x, mu, var);
  const std::vector<T> inv = inv_std(var, eps);
  const std::size_t n = x.pixels();

  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const T* px = x.data() + p * c;
    const T* pg = grad_out.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double xhat = (px[ch] - mu[ch]) * inv[ch];
      sum_g[ch] += pg[ch];
      sum_gx[ch] += pg[ch] * xhat;
    }
  }

  BnGrads<T> grads;
  grads.gamma.resize(c);
  grads.beta.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    grads.gamma[ch] = static_cast<T>(sum_gx[ch]);
    grads.beta[ch] = static_cast<T>(sum_g[ch]);
  }
  grads.input = Tensor<T>::like(x);
  const double nd = static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p) {
    const T* px = x.data() + p * c;
    const T* pg = grad_out.data() + p * c;
    T* pd = grads.input.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double xhat = (px[ch] - mu[ch]) * inv[ch];
      const double scale = static_cast<double>(gamma[ch]) * inv[ch] / nd;
      pd[ch] = static_cast<T>(scale * (nd * pg[ch] - sum_g[ch] - xhat * sum_gx[ch]));
    }
  }
  return grads;
}

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation act) {
  Tensor<T> y = Tensor<T>::like(x);
  const std::size_t n = x.numel();
  if (act.kind == Activation::Kind::Relu) {
    for (std::size_t i = 0; i < n; ++i) y.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  } else {
    if (!(act.omega > 0.0)) throw ShapeError("sine activation needs omega > 0");
    const T w = static_cast<T>(act.omega);
    for (std::size_t i = 0; i < n; ++i) y.data()[i] = std::sin(w * x.data()[i]);
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& grad_out, const Tensor<T>& x, Activation act) {
  require_same_shape(grad_out.shape(), x.shape(), "activation_backward");
  Tensor<T> g = Tensor<T>::like(x);
  const std::size_t n = x.numel();
  const T* xp = x.data();
  const T* gp = grad_out.data();
  T* op = g.data();
  if (act.kind == Activation::Kind::Relu) {
    for (std::size_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? gp[i] : T(0);
  } else {
    if (!(act.omega > 0.0)) throw ShapeError("sine activation needs omega > 0");
    const T w = static_cast<T>(act.omega);
    for (std::size_t i = 0; i < n; ++i) op[i] = gp[i] * w * std::cos(w * xp[i]);
  }
  return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::like(x);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data()[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.pixels() == 0) throw ShapeError("global_avg_pool: zero spatial size");
  const std::size_t c = x.channels();
  std::vector<double> sum(c, 0.0);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += x.data()[p * c + ch];
  }
  Tensor<T> out(1, 1, c);
  for (std::size_t ch = 0; ch < c; ++ch) out.data()[ch] = static_cast<T>(sum[ch] / static_cast<double>(x.pixels()));
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  if (input_shape.height * input_shape.width == 0) throw ShapeError("global_avg_pool_backward: zero spatial size");
  if (grad_out.shape() != Shape{1, 1, input_shape.channels}) throw ShapeError("global_avg_pool_backward: bad grad shape");
  Tensor<T> g(input_shape.height, input_shape.width, input_shape.channels);
  const T inv = T(1) / static_cast<T>(input_shape.height * input_shape.width);
  const std::size_t c = input_shape.channels;
  for (std::size_t p = 0; p < g.pixels(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) g.data()[p * c + ch] = grad_out.data()[ch] * inv;
  }
  return g;
}

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const std::vector<T>& scale) {
  const std::size_t c = x.channels();
  if (scale.size() != c) throw ShapeError("channel_scale: channel mismatch");
  Tensor<T> y = Tensor<T>::like(x);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) y.data()[p * c + ch] = x.data()[p * c + ch] * scale[ch];
  }
  return y;
}

template <typename T>
ChannelScaleGrads<T> channel_scale_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const std::vector<T>& scale) {
  require_same_shape(grad_out.shape(), x.shape(), "channel_scale_backward");
  const std::size_t c = x.channels();
  if (scale.size() != c) throw ShapeError("channel_scale_backward: channel mismatch");
  ChannelScaleGrads<T> g;
  g.input = channel_scale(grad_out, scale);
  std::vector<double> acc(c, 0.0);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += grad_out.data()[p * c + ch] * x.data()[p * c + ch];
  }
  g.scale.assign(acc.begin(), acc.end());
  return g;
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "mse_loss");
  LossResult<T> r;
  r.grad = Tensor<T>::like(pred);
  const double n = static_cast<double>(pred.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    sum += d * d;
    r.grad.data()[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss = n > 0 ? sum / n : 0.0;
  return r;
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
  require_same_shape(acc.shape(), x.shape(), "add");
  for (std::size_t i = 0; i < x.numel(); ++i) acc.data()[i] += x.data()[i];
}

#define INR_INSTANTIATE(T)                                                                                  \
  template BnForward<T> batchnorm_forward(const Tensor<T>&, const BnParams<T>&, Mode);                      \
  template BnGrads<T> batchnorm_backward(const Tensor<T>&, const Tensor<T>&, const std::vector<T>&, T);     \
  template Tensor<T> activation_forward(const Tensor<T>&, Activation);                                      \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation);                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                             \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                     \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&);                              \
  template Tensor<T> channel_scale(const Tensor<T>&, const std::vector<T>&);                                \
  template ChannelScaleGrads<T> channel_scale_backward(const Tensor<T>&, const Tensor<T>&, const std::vector<T>&); \
  template LossResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                      \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

}  // namespace inr
