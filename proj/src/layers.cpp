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

#include "inr/layers.hpp"

#include <cmath>
#include <numbers>

namespace inr {

std::string to_string(Decoration d) {
  switch (d) {
    case Decoration::None: return "none";
    case Decoration::TripleBranch: return "sr";
    case Decoration::PointwiseChain: return "wr";
    case Decoration::DynamicGate: return "dr";
  }
  return "none";
}

Decoration parse_decoration(const std::string& name) {
  if (name == "none") return Decoration::None;
  if (name == "sr" || name == "triple-branch") return Decoration::TripleBranch;
  if (name == "wr" || name == "pointwise-chain") return Decoration::PointwiseChain;
  if (name == "dr" || name == "dynamic-gate") return Decoration::DynamicGate;
  throw ShapeError("unknown decoration '" + name + "' (expected none, sr, wr or dr)");
}

void LayerSpec::validate() const {
  switch (kind) {
    case Kind::Conv:
      if (k % 2 == 0) throw ShapeError("conv layer needs an odd kernel size");
      [[fallthrough]];
    case Kind::Linear:
      if (cout == 0) throw ShapeError("layer output channels must be positive");
      break;
    case Kind::Activation:
      if (activation.kind == Activation::Kind::Sine && !(activation.omega > 0.0)) {
        throw ShapeError("sine activation needs omega > 0");
      }
      break;
    case Kind::PosEncode:
      if (octaves < 1) throw ShapeError("positional encoding needs at least one octave");
      break;
    case Kind::SeBlock:
      if (expand < 1) throw ShapeError("expand ratio must be >= 1");
      break;
    case Kind::BatchNorm: break;
  }
  if (decoration != Decoration::None && expand < 1) throw ShapeError("decorated layer needs expand ratio >= 1");
}

std::string LayerSpec::str() const {
  std::string s;
  switch (kind) {
    case Kind::Conv: s = "conv" + std::to_string(k) + "x" + std::to_string(k) + "->" + std::to_string(cout); break;
    case Kind::Linear: s = "linear->" + std::to_string(cout); break;
    case Kind::BatchNorm: s = "bn"; break;
    case Kind::Activation:
      s = activation.kind == Activation::Kind::Relu ? "relu" : "sine(" + std::to_string(activation.omega) + ")";
      break;
    case Kind::PosEncode: s = "posenc(" + std::to_string(octaves) + ")"; break;
    case Kind::SeBlock: s = "se(x" + std::to_string(expand) + ")"; break;
  }
  if (decoration != Decoration::None) s += "[" + to_string(decoration) + "]";
  return s;
}

template <typename T>
void HiddenBlock<T>::validate() const {
  main.validate();
  if (use_bn) {
    bn_main.validate();
    if (bn_main.channels() != main.cout) throw ShapeError("block BN channels differ from conv output");
  }
  if (activation.kind == Activation::Kind::Sine && !(activation.omega > 0.0)) throw ShapeError("sine omega must be > 0");

  const bool sr = decoration == Decoration::TripleBranch;
  const bool wr = decoration == Decoration::PointwiseChain;
  const bool dr = decoration == Decoration::DynamicGate;
  if (sr != !extra_branches.empty() || wr != !pw_chain.empty() || dr != gate.has_value()) {
    throw ShapeError("block decoration " + to_string(decoration) + " does not match its parameters");
  }
  if (decoration != Decoration::None && !use_bn) throw ShapeError("decorated blocks require batch norm");

  if (sr) {
    if (extra_branches.size() != 2) throw ShapeError("triple-branch block needs exactly two extra branches");
    for (const auto& br : extra_branches) {
      br.conv.validate();
      br.bn.validate();
      if (br.conv.k != main.k || br.conv.cin != main.cin || br.conv.cout != main.cout || br.bn.channels() != main.cout) {
        throw ShapeError("triple-branch kernels must share (k, cin, cout) with the main kernel");
      }
    }
  }
  if (wr) {
    if (pw_chain.size() != 2) throw ShapeError("pointwise chain must hold exactly two 1x1 layers");
    const auto& up = pw_chain[0];
    const auto& down = pw_chain[1];
    up.conv.validate();
    down.conv.validate();
    up.bn.validate();
    down.bn.validate();
    if (up.conv.k != 1 || down.conv.k != 1 || up.conv.cin != main.cout || down.conv.cin != up.conv.cout ||
        down.conv.cout != main.cout || up.bn.channels() != up.conv.cout || down.bn.channels() != main.cout) {
      throw ShapeError("pointwise chain must be 1x1 C->eC then 1x1 eC->C");
    }
  }
  if (dr) {
    gate->reduce.validate();
    gate->expand.validate();
    if (gate->reduce.k != 1 || gate->expand.k != 1 || gate->reduce.cin != main.cout ||
        gate->expand.cin != gate->reduce.cout || gate->expand.cout != main.cout) {
      throw ShapeError("dynamic gate must be 1x1 C->eC then 1x1 eC->C");
    }
  }
}

template <typename T>
std::size_t HiddenBlock<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const std::vector<T>& v) { n += v.size(); });
  return n;
}

template <typename T>
HiddenBlock<T> HiddenBlock<T>::zeros_like() const {
  HiddenBlock<T> z = *this;
  z.for_each_parameter([](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
  z.for_each_statistic([](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
  return z;
}

template <typename T>
template <typename U>
HiddenBlock<U> HiddenBlock<T>::cast() const {
  HiddenBlock<U> out;
  out.decoration = decoration;
  out.activation = activation;
  out.use_bn = use_bn;
  out.main = main.template cast<U>();
  out.bn_main = bn_main.template cast<U>();
  for (const auto& br : extra_branches) out.extra_branches.push_back({br.conv.template cast<U>(), br.bn.template cast<U>()});
  for (const auto& pw : pw_chain) out.pw_chain.push_back({pw.conv.template cast<U>(), pw.bn.template cast<U>()});
  if (gate) out.gate = GateParams<U>{gate->reduce.template cast<U>(), gate->expand.template cast<U>()};
  return out;
}

namespace {

template <typename T>
Tensor<T> apply_bn(const Tensor<T>& z, const BnParams<T>& bn, Mode mode, BlockCache<T>& cache) {
  BnForward<T> r = batchnorm_forward(z, bn, mode);
  if (mode == Mode::Train) cache.batch_stats.push_back(std::move(r.stats));
  return std::move(r.y);
}

template <typename T>
void accumulate(std::vector<T>& acc, const std::vector<T>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

// Backward through conv -> BN (Train-mode statistics). Adds into grads and returns d/d(input).
template <typename T>
Tensor<T> conv_bn_backward(const Tensor<T>& grad_bn_out, const Tensor<T>& conv_out, const Tensor<T>& input,
                           const ConvKernel<T>& conv, const BnParams<T>& bn, ConvKernel<T>& g_conv, BnParams<T>& g_bn,
                           bool need_input_grad) {
  BnGrads<T> gb = batchnorm_backward(grad_bn_out, conv_out, bn.gamma, bn.eps);
  g_bn.gamma = std::move(gb.gamma);
  g_bn.beta = std::move(gb.beta);
  ConvGrads<T> gc = conv2d_backward(gb.input, input, conv, need_input_grad);
  g_conv.weights = std::move(gc.kernel.weights);
  g_conv.bias = std::move(gc.kernel.bias);
  return std::move(gc.input);
}

}  // namespace

template <typename T>
BlockForward<T> block_forward(const HiddenBlock<T>& block, Tensor<T> x, Mode mode) {
  if (x.channels() != block.main.cin) {
    throw ShapeError("block input has " + std::to_string(x.channels()) + " channels, block expects " +
                     std::to_string(block.main.cin));
  }
  block.validate();

  BlockForward<T> out;
  BlockCache<T>& cache = out.cache;
  cache.mode = mode;
  cache.input = std::move(x);
  const Tensor<T>& in = cache.input;
  // Only the tensors block_backward reads are kept; the rest are moved along.
  cache.main_conv = conv2d_forward(in, block.main);
  if (block.use_bn) {
    cache.main_out = apply_bn(cache.main_conv, block.bn_main, mode, cache);
  } else {
    cache.main_out = std::move(cache.main_conv);
    cache.main_conv = Tensor<T>();
  }

  switch (block.decoration) {
    case Decoration::None:
      cache.pre_activation = std::move(cache.main_out);
      cache.main_out = Tensor<T>();
      break;
    case Decoration::TripleBranch: {
      cache.pre_activation = std::move(cache.main_out);
      cache.main_out = Tensor<T>();
      for (const auto& br : block.extra_branches) {
        cache.branch_conv.push_back(conv2d_forward(in, br.conv));
        add_inplace(cache.pre_activation, apply_bn(cache.branch_conv.back(), br.bn, mode, cache));
      }
      break;
    }
    case Decoration::PointwiseChain: {
      Tensor<T> t = std::move(cache.main_out);
      cache.main_out = Tensor<T>();
      for (const auto& pw : block.pw_chain) {
        cache.chain_in.push_back(std::move(t));
        cache.chain_conv.push_back(conv2d_forward(cache.chain_in.back(), pw.conv));
        t = apply_bn(cache.chain_conv.back(), pw.bn, mode, cache);
      }
      cache.pre_activation = std::move(t);
      break;
    }
    case Decoration::DynamicGate: {
      cache.pooled = global_avg_pool(cache.main_out);
      cache.gate_hidden = conv2d_forward(cache.pooled, block.gate->reduce);
      cache.gate_logits = conv2d_forward(activation_forward(cache.gate_hidden, Activation::relu()), block.gate->expand);
      const Tensor<T> coeff = sigmoid(cache.gate_logits);
      cache.coeff.assign(coeff.values().begin(), coeff.values().end());
      cache.pre_activation = channel_scale(cache.main_out, cache.coeff);
      break;
    }
  }
  out.y = activation_forward(cache.pre_activation, block.activation);
  return out;
}

template <typename T>
BlockGrads<T> block_backward(const HiddenBlock<T>& block, const BlockCache<T>& cache, const Tensor<T>& grad_y,
                             bool need_input_grad) {
  if (block.use_bn && cache.mode != Mode::Train) {
    throw ShapeError("block_backward needs a Train-mode cache for a block with batch norm");
  }
  if (cache.input.channels() != block.main.cin || grad_y.shape() != cache.pre_activation.shape()) {
    throw ShapeError("block_backward: cache or gradient does not match the block");
  }

  BlockGrads<T> g;
  g.params = block.zeros_like();
  Tensor<T> g_pre = activation_backward(grad_y, cache.pre_activation, block.activation);

  // Gradient arriving at the main branch's BN output (or conv output without BN).
  Tensor<T> g_main;
  switch (block.decoration) {
    case Decoration::None:
      g_main = std::move(g_pre);
      break;
    case Decoration::TripleBranch: {
      for (std::size_t b = 0; b < block.extra_branches.size(); ++b) {
        auto& gb = g.params.extra_branches[b];
        Tensor<T> gx = conv_bn_backward(g_pre, cache.branch_conv[b], cache.input, block.extra_branches[b].conv,
                                        block.extra_branches[b].bn, gb.conv, gb.bn, need_input_grad);
        if (need_input_grad) {
          if (g.input.empty()) {
            g.input = std::move(gx);
          } else {
            add_inplace(g.input, gx);
          }
        }
      }
      g_main = std::move(g_pre);
      break;
    }
    case Decoration::PointwiseChain: {
      Tensor<T> t = std::move(g_pre);
      for (std::size_t n = block.pw_chain.size(); n-- > 0;) {
        auto& gp = g.params.pw_chain[n];
        t = conv_bn_backward(t, cache.chain_conv[n], cache.chain_in[n], block.pw_chain[n].conv, block.pw_chain[n].bn,
                             gp.conv, gp.bn, true);
      }
      g_main = std::move(t);
      break;
    }
    case Decoration::DynamicGate: {
      ChannelScaleGrads<T> cs = channel_scale_backward(g_pre, cache.main_out, cache.coeff);
      g_main = std::move(cs.input);
      Tensor<T> g_logits(1, 1, cache.coeff.size());
      for (std::size_t c = 0; c < cache.coeff.size(); ++c) {
        g_logits.data()[c] = cs.scale[c] * cache.coeff[c] * (T(1) - cache.coeff[c]);
      }
      const Tensor<T> hidden_act = activation_forward(cache.gate_hidden, Activation::relu());
      ConvGrads<T> ge = conv2d_backward(g_logits, hidden_act, block.gate->expand);
      const Tensor<T> g_hidden = activation_backward(ge.input, cache.gate_hidden, Activation::relu());
      ConvGrads<T> gr = conv2d_backward(g_hidden, cache.pooled, block.gate->reduce);
      g.params.gate->expand = std::move(ge.kernel);
      g.params.gate->reduce = std::move(gr.kernel);
      add_inplace(g_main, global_avg_pool_backward(gr.input, cache.main_out.shape()));
      break;
    }
  }

  Tensor<T> gx;
  if (block.use_bn) {
    gx = conv_bn_backward(g_main, cache.main_conv, cache.input, block.main, block.bn_main, g.params.main,
                          g.params.bn_main, need_input_grad);
  } else {
    ConvGrads<T> gc = conv2d_backward(g_main, cache.input, block.main, need_input_grad);
    g.params.main.weights = std::move(gc.kernel.weights);
    g.params.main.bias = std::move(gc.kernel.bias);
    gx = std::move(gc.input);
  }
  if (need_input_grad) {
    if (g.input.empty()) {
      g.input = std::move(gx);
    } else {
      add_inplace(g.input, gx);
    }
  } else {
    g.input = Tensor<T>();
  }
  return g;
}

template <typename T>
void freeze_statistics(HiddenBlock<T>& block, const BlockCache<T>& cache) {
  if (cache.mode != Mode::Train) throw ShapeError("freeze_statistics needs a Train-mode cache");
  std::size_t idx = 0;
  auto take = [&](BnParams<T>& bn) {
    if (idx >= cache.batch_stats.size()) throw ShapeError("cache holds fewer BN statistics than the block");
    bn.mu = cache.batch_stats[idx].mu;
    bn.var = cache.batch_stats[idx].var;
    ++idx;
  };
  if (block.use_bn) take(block.bn_main);
  for (auto& br : block.extra_branches) take(br.bn);
  for (auto& pw : block.pw_chain) take(pw.bn);
  if (idx != cache.batch_stats.size()) throw ShapeError("cache holds more BN statistics than the block");
}

template <typename T>
Tensor<T> positional_encode(const Tensor<T>& grid, std::size_t octaves) {
  if (octaves < 1) throw ShapeError("positional_encode: octaves must be >= 1");
  if (grid.channels() != 2) throw ShapeError("positional_encode: expected 2 coordinate channels, got " +
                                             std::to_string(grid.channels()));
  const std::size_t L = octaves;
  Tensor<T> out(grid.height(), grid.width(), 4 * L);
  for (std::size_t p = 0; p < grid.pixels(); ++p) {
    const T* v = grid.data() + p * 2;
    T* o = out.data() + p * 4 * L;
    for (std::size_t d = 0; d < 2; ++d) {
      double freq = std::numbers::pi;
      for (std::size_t j = 0; j < L; ++j, freq *= 2.0) {
        const double angle = freq * static_cast<double>(v[d]);
        o[d * L + j] = static_cast<T>(std::sin(angle));
        o[2 * L + d * L + j] = static_cast<T>(std::cos(angle));
      }
    }
  }
  return out;
}

#define INR_INSTANTIATE(T)                                                                                 \
  template struct HiddenBlock<T>;                                                                          \
  template BlockForward<T> block_forward(const HiddenBlock<T>&, Tensor<T>, Mode);                   \
  template BlockGrads<T> block_backward(const HiddenBlock<T>&, const BlockCache<T>&, const Tensor<T>&, bool); \
  template void freeze_statistics(HiddenBlock<T>&, const BlockCache<T>&);                                  \
  template Tensor<T> positional_encode(const Tensor<T>&, std::size_t);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

template HiddenBlock<double> HiddenBlock<float>::cast<double>() const;
template HiddenBlock<float> HiddenBlock<double>::cast<float>() const;
template HiddenBlock<float> HiddenBlock<float>::cast<float>() const;
template HiddenBlock<double> HiddenBlock<double>::cast<double>() const;

}  // namespace inr
