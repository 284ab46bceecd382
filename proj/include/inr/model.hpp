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

#ifndef INR_MODEL_HPP
#define INR_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inr/layers.hpp"
#include "inr/tensor.hpp"

namespace inr {

class Rng;

enum class Family { Mlp, PeMlp, Siren, ConvInr };

std::string to_string(Family f);
Family parse_family(const std::string& name);

struct GridShape {
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const GridShape&) const = default;
};

/// Raised when a model whose gates were frozen for one grid is asked to render another.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Raised by model_backward when the parameters changed after the forward pass.
class StaleCache : public Error {
 public:
  using Error::Error;
};

struct ModelSpec {
  Family family = Family::ConvInr;
  std::size_t depth = 10;
  std::size_t width = 32;
  std::size_t kernel = 3;  // ConvInr only; the MLP families always use 1
  Decoration decoration = Decoration::None;
  std::size_t expand = 4;
  std::size_t pe_octaves = 10;
  double omega0 = 30.0;
  std::size_t in_channels = 2;
  std::size_t out_channels = 3;

  void validate() const;
  /// Kernel size actually used by the hidden blocks.
  std::size_t effective_kernel() const { return family == Family::ConvInr ? kernel : 1; }
  bool uses_bn() const { return family == Family::ConvInr; }
  /// Flattened layer stack, e.g. for reports.
  std::vector<LayerSpec> layers() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Hidden blocks followed by a bare output convolution (no BN, no activation).
template <typename T>
struct Model {
  ModelSpec spec;
  std::vector<HiddenBlock<T>> blocks;
  ConvKernel<T> head;
  /// Resolution the model was fitted on, when known.
  std::optional<GridShape> train_grid;
  /// Set on models whose dynamic gates were frozen; forward refuses other grids.
  std::optional<GridShape> fixed_grid;
  /// Bumped whenever parameters are updated in place; caches remember it.
  std::uint64_t revision = 0;

  std::size_t parameter_count() const;
  void validate() const;

  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& b : blocks) b.for_each_parameter(f);
    f(head.weights);
    f(head.bias);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto& b : blocks) b.for_each_parameter(f);
    f(head.weights);
    f(head.bias);
  }

  /// Same structure with every array zeroed (gradient container).
  Model zeros_like() const;

  template <typename U>
  Model<U> cast() const;
};

template <typename T>
Tensor<T> make_coordinate_grid(std::size_t height, std::size_t width);

/// Parameters: LeCun uniform (+-sqrt(3/fan_in)) or the SIREN scheme, biases 0,
/// BN gamma 1 and beta 0. fan_in = k*k*cin.
template <typename T>
Model<T> build_model(const ModelSpec& spec, Rng& rng);

/// All-zero model of the given spec, for loaders.
template <typename T>
Model<T> empty_model(const ModelSpec& spec);

template <typename T>
struct ModelCache {
  Mode mode = Mode::Eval;
  std::uint64_t revision = 0;
  Shape input_shape;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> head_input;
};

template <typename T>
struct ModelForward {
  Tensor<T> pred;
  ModelCache<T> cache;
};

template <typename T>
ModelForward<T> model_forward(const Model<T>& model, const Tensor<T>& grid, Mode mode);

/// Convenience wrapper: Eval-mode prediction without keeping caches.
template <typename T>
Tensor<T> model_predict(const Model<T>& model, const Tensor<T>& grid);

/// Parameter gradients in a Model-shaped container.
template <typename T>
Model<T> model_backward(const Model<T>& model, const ModelCache<T>& cache, const Tensor<T>& grad_pred);

/// Copies the Train-mode batch statistics of `cache` into every BN layer.
template <typename T>
void freeze_statistics(Model<T>& model, const ModelCache<T>& cache);

/// Clamp to [0, 1]; applied only at evaluation and export time.
template <typename T>
Tensor<T> clamp_unit(const Tensor<T>& x);

}  // namespace inr

#endif  // INR_MODEL_HPP
