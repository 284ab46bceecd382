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

#include "inr/model.hpp"

#include <algorithm>
#include <cmath>

#include "inr/training.hpp"

namespace inr {

std::string to_string(Family f) {
  switch (f) {
    case Family::Mlp: return "mlp";
    case Family::PeMlp: return "pe-mlp";
    case Family::Siren: return "siren";
    case Family::ConvInr: return "conv-inr";
  }
  return "conv-inr";
}

Family parse_family(const std::string& name) {
  if (name == "mlp") return Family::Mlp;
  if (name == "pe-mlp") return Family::PeMlp;
  if (name == "siren") return Family::Siren;
  if (name == "conv-inr") return Family::ConvInr;
  throw ShapeError("unknown model family '" + name + "' (expected mlp, pe-mlp, siren or conv-inr)");
}

void ModelSpec::validate() const {
  if (depth < 1) throw ShapeError("depth must be >= 1");
  if (width < 1) throw ShapeError("width must be >= 1");
  if (kernel % 2 == 0) throw ShapeError("kernel size must be odd");
  if (expand < 1) throw ShapeError("expand ratio must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw ShapeError("channel counts must be positive");
  if (family == Family::PeMlp) {
    if (pe_octaves < 1) throw ShapeError("pe_octaves must be >= 1");
    if (in_channels != 2) throw ShapeError("positional encoding expects 2 input channels");
  }
  if (family == Family::Siren && !(omega0 > 0.0)) throw ShapeError("omega0 must be > 0");
  if (family != Family::ConvInr && decoration != Decoration::None) {
    throw ShapeError("reparameterization decorations apply to conv-inr only");
  }
}

std::vector<LayerSpec> ModelSpec::layers() const {
  validate();
  using K = LayerSpec::Kind;
  std::vector<LayerSpec> out;
  const std::size_t k = effective_kernel();
  const K lin = family == Family::ConvInr ? K::Conv : K::Linear;
  if (family == Family::PeMlp) out.push_back({K::PosEncode, 1, 4 * pe_octaves, {}, pe_octaves, 0, Decoration::None});
  const Activation act = family == Family::Siren ? Activation::sine(omega0) : Activation::relu();
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t e = decoration == Decoration::None ? 0 : expand;
    out.push_back({lin, k, width, {}, 0, e, decoration});
    if (uses_bn()) out.push_back({K::BatchNorm, 1, width, {}, 0, 0, Decoration::None});
    if (decoration == Decoration::DynamicGate) out.push_back({K::SeBlock, 1, width, {}, 0, expand, Decoration::None});
    out.push_back({K::Activation, 1, width, act, 0, 0, Decoration::None});
  }
  out.push_back({lin, k, out_channels, {}, 0, 0, Decoration::None});
  for (const auto& l : out) l.validate();
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const std::vector<T>& v) { n += v.size(); });
  return n;
}

template <typename T>
void Model<T>::validate() const {
  spec.validate();
  if (blocks.size() != spec.depth) throw ShapeError("model has " + std::to_string(blocks.size()) + " blocks, spec says " +
                                                    std::to_string(spec.depth));
  std::size_t c = spec.family == Family::PeMlp ? 4 * spec.pe_octaves : spec.in_channels;
  for (const auto& b : blocks) {
    b.validate();
    if (b.cin() != c) throw ShapeError("consecutive layer channel counts disagree");
    c = b.cout();
  }
  head.validate();
  if (head.cin != c || head.cout != spec.out_channels) throw ShapeError("output layer shape does not match the spec");
}

template <typename T>
Model<T> Model<T>::zeros_like() const {
  Model<T> z;
  z.spec = spec;
  z.train_grid = train_grid;
  z.fixed_grid = fixed_grid;
  for (const auto& b : blocks) z.blocks.push_back(b.zeros_like());
  z.head = ConvKernel<T>::zeros(head.k, head.cin, head.cout);
  return z;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.spec = spec;
  out.train_grid = train_grid;
  out.fixed_grid = fixed_grid;
  for (const auto& b : blocks) out.blocks.push_back(b.template cast<U>());
  out.head = head.template cast<U>();
  return out;
}

template <typename T>
Tensor<T> make_coordinate_grid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ShapeError("coordinate grid needs non-zero dimensions");
  Tensor<T> grid(height, width, 2);
  for (std::size_t i = 0; i < height; ++i) {
    const double y = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(height);
    for (std::size_t j = 0; j < width; ++j) {
      const double x = -1.0 + 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(width);
      grid(i, j, 0) = static_cast<T>(x);
      grid(i, j, 1) = static_cast<T>(y);
    }
  }
  return grid;
}

namespace {

template <typename T>
void fill_uniform(std::vector<T>& v, Rng& rng, double bound) {
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
}

double fan_in(const ConvKernel<float>& k) { return static_cast<double>(k.k * k.k * k.cin); }
double fan_in(const ConvKernel<double>& k) { return static_cast<double>(k.k * k.k * k.cin); }

template <typename T>
void lecun(ConvKernel<T>& k, Rng& rng) {
  fill_uniform(k.weights, rng, std::sqrt(3.0 / fan_in(k)));
}

template <typename T>
HiddenBlock<T> skeleton_block(const ModelSpec& spec, std::size_t cin) {
  HiddenBlock<T> b;
  const std::size_t k = spec.effective_kernel();
  const std::size_t c = spec.width;
  const std::size_t e = spec.expand * c;
  b.decoration = spec.decoration;
  b.activation = spec.family == Family::Siren ? Activation::sine(spec.omega0) : Activation::relu();
  b.use_bn = spec.uses_bn();
  b.main = ConvKernel<T>::zeros(k, cin, c);
  b.bn_main = b.use_bn ? BnParams<T>::identity(c) : BnParams<T>{};
  switch (spec.decoration) {
    case Decoration::None: break;
    case Decoration::TripleBranch:
      for (int n = 0; n < 2; ++n) b.extra_branches.push_back({ConvKernel<T>::zeros(k, cin, c), BnParams<T>::identity(c)});
      break;
    case Decoration::PointwiseChain:
      b.pw_chain.push_back({ConvKernel<T>::zeros(1, c, e), BnParams<T>::identity(e)});
      b.pw_chain.push_back({ConvKernel<T>::zeros(1, e, c), BnParams<T>::identity(c)});
      break;
    case Decoration::DynamicGate:
      b.gate = GateParams<T>{ConvKernel<T>::zeros(1, c, e), ConvKernel<T>::zeros(1, e, c)};
      break;
  }
  return b;
}

}  // namespace

template <typename T>
Model<T> empty_model(const ModelSpec& spec) {
  spec.validate();
  Model<T> m;
  m.spec = spec;
  std::size_t cin = spec.family == Family::PeMlp ? 4 * spec.pe_octaves : spec.in_channels;
  for (std::size_t d = 0; d < spec.depth; ++d) {
    m.blocks.push_back(skeleton_block<T>(spec, cin));
    cin = spec.width;
  }
  m.head = ConvKernel<T>::zeros(spec.effective_kernel(), spec.width, spec.out_channels);
  return m;
}

template <typename T>
Model<T> build_model(const ModelSpec& spec, Rng& rng) {
  Model<T> m = empty_model<T>(spec);
  const bool siren = spec.family == Family::Siren;
  for (std::size_t d = 0; d < m.blocks.size(); ++d) {
    auto& b = m.blocks[d];
    if (siren) {
      const double fi = fan_in(b.main);
      fill_uniform(b.main.weights, rng, d == 0 ? 1.0 / fi : std::sqrt(6.0 / fi) / spec.omega0);
    } else {
      lecun(b.main, rng);
    }
    for (auto& br : b.extra_branches) lecun(br.conv, rng);
    for (auto& pw : b.pw_chain) lecun(pw.conv, rng);
    if (b.gate) {
      lecun(b.gate->reduce, rng);
      lecun(b.gate->expand, rng);
    }
  }
  if (siren) {
    fill_uniform(m.head.weights, rng, std::sqrt(6.0 / fan_in(m.head)) / spec.omega0);
  } else {
    lecun(m.head, rng);
  }
  return m;
}

template <typename T>
ModelForward<T> model_forward(const Model<T>& model, const Tensor<T>& grid, Mode mode) {
  if (grid.channels() != model.spec.in_channels) {
    throw ShapeError("model expects " + std::to_string(model.spec.in_channels) + " input channels, grid has " +
                     std::to_string(grid.channels()));
  }
  if (model.fixed_grid && (grid.height() != model.fixed_grid->height || grid.width() != model.fixed_grid->width)) {
    throw GridMismatch("model gates were frozen for a " + std::to_string(model.fixed_grid->height) + "x" +
                       std::to_string(model.fixed_grid->width) + " grid; cannot evaluate on " +
                       std::to_string(grid.height()) + "x" + std::to_string(grid.width()));
  }
  ModelForward<T> out;
  out.cache.mode = mode;
  out.cache.revision = model.revision;
  out.cache.input_shape = grid.shape();
  Tensor<T> x = model.spec.family == Family::PeMlp ? positional_encode(grid, model.spec.pe_octaves) : grid;
  out.cache.blocks.reserve(model.blocks.size());
  for (const auto& b : model.blocks) {
    BlockForward<T> f = block_forward(b, std::move(x), mode);
    out.cache.blocks.push_back(std::move(f.cache));
    x = std::move(f.y);
  }
  out.pred = conv2d_forward(x, model.head);
  out.cache.head_input = std::move(x);
  return out;
}

template <typename T>
Tensor<T> model_predict(const Model<T>& model, const Tensor<T>& grid) {
  return model_forward(model, grid, Mode::Eval).pred;
}

template <typename T>
Model<T> model_backward(const Model<T>& model, const ModelCache<T>& cache, const Tensor<T>& grad_pred) {
  if (cache.revision != model.revision || cache.blocks.size() != model.blocks.size()) {
    throw StaleCache("model parameters changed since the forward pass that produced this cache");
  }
  Model<T> grads = model.zeros_like();
  ConvGrads<T> gh = conv2d_backward(grad_pred, cache.head_input, model.head);
  grads.head = std::move(gh.kernel);
  Tensor<T> g = std::move(gh.input);
  for (std::size_t n = model.blocks.size(); n-- > 0;) {
    BlockGrads<T> gb = block_backward(model.blocks[n], cache.blocks[n], g, n > 0);
    grads.blocks[n] = std::move(gb.params);
    g = std::move(gb.input);
  }
  return grads;
}

template <typename T>
void freeze_statistics(Model<T>& model, const ModelCache<T>& cache) {
  if (cache.mode != Mode::Train || cache.blocks.size() != model.blocks.size()) {
    throw ShapeError("freeze_statistics needs a Train-mode cache of the same model");
  }
  for (std::size_t n = 0; n < model.blocks.size(); ++n) freeze_statistics(model.blocks[n], cache.blocks[n]);
}

template <typename T>
Tensor<T> clamp_unit(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.values()) v = std::clamp(v, T(0), T(1));
  return y;
}

#define INR_INSTANTIATE(T)                                                                        \
  template struct Model<T>;                                                                       \
  template Tensor<T> make_coordinate_grid<T>(std::size_t, std::size_t);                           \
  template Model<T> build_model<T>(const ModelSpec&, Rng&);                                       \
  template Model<T> empty_model<T>(const ModelSpec&);                                             \
  template ModelForward<T> model_forward(const Model<T>&, const Tensor<T>&, Mode);                \
  template Tensor<T> model_predict(const Model<T>&, const Tensor<T>&);                            \
  template Model<T> model_backward(const Model<T>&, const ModelCache<T>&, const Tensor<T>&);      \
  template void freeze_statistics(Model<T>&, const ModelCache<T>&);                               \
  template Tensor<T> clamp_unit(const Tensor<T>&);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;

}  // namespace inr
