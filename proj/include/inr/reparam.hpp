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

// Post-training fusion passes. Each decorated block collapses into one plain
// convolution followed by an identity batch norm, so the fused model has
// exactly the layout and parameter count of an undecorated Conv-INR.

#ifndef INR_REPARAM_HPP
#define INR_REPARAM_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inr/model.hpp"

namespace inr {

struct FusionReport {
  std::string pass = "none";
  std::vector<double> block_deviation;
  double max_deviation = 0.0;
  std::size_t params_before = 0;
  std::size_t params_after = 0;

  /// Flat key=value block, one entry per line.
  std::string to_text() const;
};

/// Folds frozen batch-norm statistics into the preceding convolution:
/// w'[..,c] = w[..,c] g[c] / sqrt(var[c] + eps), b'[c] = (b[c] - mu[c]) g[c] / sqrt(var[c] + eps) + beta[c].
template <typename T>
ConvKernel<T> fold_bn(const ConvKernel<T>& kernel, const BnParams<T>& bn);

/// Sum of same-shaped kernels (weights and biases).
template <typename T>
ConvKernel<T> fuse_branches(std::span<const ConvKernel<T>> branches);

/// Absorbs a chain of 1x1 convolutions applied after `main` into `main`:
/// each spatial tap's cin->cout map is left-multiplied by M_n...M_1 and the
/// bias becomes A b + a.
template <typename T>
ConvKernel<T> fuse_pointwise_chain(const ConvKernel<T>& main, std::span<const ConvKernel<T>> chain);

template <typename T>
struct FusionResult {
  Model<T> model;
  FusionReport report;
};

/// Freezes every gate's coefficients on `grid` (which must be the training
/// grid when the model knows it) and scales the BN-folded main kernel by them.
/// The result is only valid on that grid and refuses any other.
template <typename T>
FusionResult<T> fuse_dynamic(const Model<T>& model, const Tensor<T>& grid);

/// Dispatches per decoration. Dynamic gates require `grid`.
template <typename T>
FusionResult<T> fuse_model(const Model<T>& model, const std::optional<Tensor<T>>& grid = std::nullopt);

/// Maximum absolute output difference of two models in Eval mode over `inputs`.
template <typename T>
double verify_equivalence(const Model<T>& a, const Model<T>& b, std::span<const Tensor<T>> inputs);

}  // namespace inr

#endif  // INR_REPARAM_HPP
