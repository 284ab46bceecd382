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

#ifndef INR_LAYERS_HPP
#define INR_LAYERS_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inr/ops.hpp"
#include "inr/tensor.hpp"

namespace inr {

/// Training-time structure attached to a hidden block. Every decoration other
/// than None folds back into a single convolution after training.
enum class Decoration {
  None,
  TripleBranch,    // three parallel conv+BN branches, summed
  PointwiseChain,  // conv+BN followed by 1x1 C->eC and eC->C conv+BN, no activation between
  DynamicGate,     // SE-style gate on the pooled BN output, inverted bottleneck C->eC->C
};

std::string to_string(Decoration d);
Decoration parse_decoration(const std::string& name);

/// Declarative description of one layer in a model stack.
struct LayerSpec {
  enum class Kind { Conv, Linear, BatchNorm, Activation, PosEncode, SeBlock };

  Kind kind = Kind::Conv;
  std::size_t k = 1;
  std::size_t cout = 0;
  inr::Activation activation{};
  std::size_t octaves = 0;
  std::size_t expand = 0;
  Decoration decoration = Decoration::None;

  void validate() const;
  std::string str() const;
};

template <typename T>
struct ConvBn {
  ConvKernel<T> conv;
  BnParams<T> bn;
  bool operator==(const ConvBn&) const = default;
};

template <typename T>
struct GateParams {
  ConvKernel<T> reduce;  // 1x1, C -> eC
  ConvKernel<T> expand;  // 1x1, eC -> C
  bool operator==(const GateParams&) const = default;
};

/// conv -> [BN] -> activation, with at most one decoration.
template <typename T>
struct HiddenBlock {
  Decoration decoration = Decoration::None;
  Activation activation{};
  bool use_bn = true;
  ConvKernel<T> main;
  BnParams<T> bn_main;
  std::vector<ConvBn<T>> extra_branches;  // TripleBranch
  std::vector<ConvBn<T>> pw_chain;        // PointwiseChain
  std::optional<GateParams<T>> gate;      // DynamicGate

  std::size_t cin() const { return main.cin; }
  std::size_t cout() const { return main.cout; }
  void validate() const;

  /// Learnable arrays (weights, biases, BN gamma/beta) in a fixed order.
  template <typename F>
  void for_each_parameter(F&& f) {
    visit_parameters(*this, f);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    visit_parameters(*this, f);
  }
  /// Recorded BN statistics (mu, var) in the same block order.
  template <typename F>
  void for_each_statistic(F&& f) {
    visit_statistics(*this, f);
  }
  template <typename F>
  void for_each_statistic(F&& f) const {
    visit_statistics(*this, f);
  }

  std::size_t parameter_count() const;
  /// Same structure, every array zero. Used as a gradient container.
  HiddenBlock zeros_like() const;

  template <typename U>
  HiddenBlock<U> cast() const;

  bool operator==(const HiddenBlock&) const = default;

 private:
  template <typename Self, typename F>
  static void visit_parameters(Self& self, F& f) {
    auto conv_bn = [&](auto& kernel, auto& bn, bool with_bn) {
      f(kernel.weights);
      f(kernel.bias);
      if (with_bn) {
        f(bn.gamma);
        f(bn.beta);
      }
    };
    conv_bn(self.main, self.bn_main, self.use_bn);
    for (auto& br : self.extra_branches) conv_bn(br.conv, br.bn, true);
    for (auto& pw : self.pw_chain) conv_bn(pw.conv, pw.bn, true);
    if (self.gate) {
      f(self.gate->reduce.weights);
      f(self.gate->reduce.bias);
      f(self.gate->expand.weights);
      f(self.gate->expand.bias);
    }
  }

  template <typename Self, typename F>
  static void visit_statistics(Self& self, F& f) {
    if (self.use_bn) {
      f(self.bn_main.mu);
      f(self.bn_main.var);
    }
    for (auto& br : self.extra_branches) {
      f(br.bn.mu);
      f(br.bn.var);
    }
    for (auto& pw : self.pw_chain) {
      f(pw.bn.mu);
      f(pw.bn.var);
    }
  }
};

/// Intermediates recorded by block_forward for block_backward.
template <typename T>
struct BlockCache {
  Mode mode = Mode::Eval;
  Tensor<T> input;
  Tensor<T> main_conv;                 // empty without BN
  Tensor<T> main_out;                  // kept for the dynamic gate only
  std::vector<Tensor<T>> branch_conv;  // TripleBranch extra branches, pre-BN
  std::vector<Tensor<T>> chain_in;     // PointwiseChain inputs of each 1x1 conv
  std::vector<Tensor<T>> chain_conv;   // PointwiseChain outputs of each 1x1 conv, pre-BN
  Tensor<T> pooled;                    // DynamicGate
  Tensor<T> gate_hidden;               // reduce conv output, pre-ReLU
  Tensor<T> gate_logits;               // expand conv output, pre-sigmoid
  std::vector<T> coeff;
  Tensor<T> pre_activation;
  /// Batch statistics of every BN layer, in for_each_statistic order. Train mode only.
  std::vector<BnParams<T>> batch_stats;
};

template <typename T>
struct BlockForward {
  Tensor<T> y;
  BlockCache<T> cache;
};

template <typename T>
BlockForward<T> block_forward(const HiddenBlock<T>& block, Tensor<T> x, Mode mode);

template <typename T>
struct BlockGrads {
  Tensor<T> input;  // empty when not requested
  HiddenBlock<T> params;
};

template <typename T>
BlockGrads<T> block_backward(const HiddenBlock<T>& block, const BlockCache<T>& cache, const Tensor<T>& grad_y,
                             bool need_input_grad = true);

/// Writes the Train-mode batch statistics recorded in `cache` into the block's BN layers.
template <typename T>
void freeze_statistics(HiddenBlock<T>& block, const BlockCache<T>& cache);

/// Axis-aligned NeRF-style encoding of an H x W x 2 coordinate tensor.
/// Channel d*L + j holds sin(2^j pi v_d); channel 2L + d*L + j the cosine.
template <typename T>
Tensor<T> positional_encode(const Tensor<T>& grid, std::size_t octaves);

}  // namespace inr

#endif  // INR_LAYERS_HPP
