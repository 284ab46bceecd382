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

#include "inr/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace inr {

std::string FusionReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << std::scientific;
  os << "fusion.pass=" << pass << "\n";
  os << "fusion.params_before=" << params_before << "\n";
  os << "fusion.params_after=" << params_after << "\n";
  os << "fusion.max_deviation=" << max_deviation << "\n";
  for (std::size_t n = 0; n < block_deviation.size(); ++n) {
    os << "fusion.block" << n << ".deviation=" << block_deviation[n] << "\n";
  }
  return os.str();
}

template <typename T>
ConvKernel<T> fold_bn(const ConvKernel<T>& kernel, const BnParams<T>& bn) {
  kernel.validate();
  bn.validate();
  if (bn.channels() != kernel.cout) throw ShapeError("fold_bn: BN channels differ from kernel cout");
  ConvKernel<T> out = kernel;
  const std::size_t taps = kernel.k * kernel.k * kernel.cin;
  for (std::size_t co = 0; co < kernel.cout; ++co) {
    const double scale = static_cast<double>(bn.gamma[co]) / std::sqrt(static_cast<double>(bn.var[co]) + bn.eps);
    for (std::size_t r = 0; r < taps; ++r) {
      out.weights[r * kernel.cout + co] = static_cast<T>(kernel.weights[r * kernel.cout + co] * scale);
    }
    out.bias[co] = static_cast<T>((static_cast<double>(kernel.bias[co]) - bn.mu[co]) * scale + bn.beta[co]);
  }
  return out;
}

template <typename T>
ConvKernel<T> fuse_branches(std::span<const ConvKernel<T>> branches) {
  if (branches.empty()) throw ShapeError("fuse_branches: no branches");
  ConvKernel<T> out = branches.front();
  out.validate();
  for (const auto& br : branches.subspan(1)) {
    br.validate();
    if (br.k != out.k || br.cin != out.cin || br.cout != out.cout) {
      throw ShapeError("fuse_branches: branches must share (k, cin, cout)");
    }
    for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += br.weights[i];
    for (std::size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += br.bias[i];
  }
  return out;
}

template <typename T>
ConvKernel<T> fuse_pointwise_chain(const ConvKernel<T>& main, std::span<const ConvKernel<T>> chain) {
  main.validate();
  const std::size_t taps = main.k * main.k * main.cin;
  std::size_t width = main.cout;
  std::vector<double> w(main.weights.begin(), main.weights.end());  // taps x width
  std::vector<double> b(main.bias.begin(), main.bias.end());
  for (const auto& pw : chain) {
    pw.validate();
    if (pw.k != 1) throw ShapeError("fuse_pointwise_chain: chain kernels must be 1x1");
    if (pw.cin != width) throw ShapeError("fuse_pointwise_chain: chain channel counts do not line up");
    const std::size_t next = pw.cout;
    std::vector<double> nw(taps * next, 0.0);
    std::vector<double> nb(pw.bias.begin(), pw.bias.end());
    for (std::size_t r = 0; r < taps; ++r) {
      for (std::size_t m = 0; m < width; ++m) {
        const double a = w[r * width + m];
        const T* row = pw.weights.data() + m * next;
        for (std::size_t co = 0; co < next; ++co) nw[r * next + co] += a * row[co];
      }
    }
    for (std::size_t m = 0; m < width; ++m) {
      const T* row = pw.weights.data() + m * next;
      for (std::size_t co = 0; co < next; ++co) nb[co] += b[m] * row[co];
    }
    w = std::move(nw);
    b = std::move(nb);
    width = next;
  }
  ConvKernel<T> out = ConvKernel<T>::zeros(main.k, main.cin, width);
  std::transform(w.begin(), w.end(), out.weights.begin(), [](double v) { return static_cast<T>(v); });
  std::transform(b.begin(), b.end(), out.bias.begin(), [](double v) { return static_cast<T>(v); });
  return out;
}

namespace {

template <typename T>
HiddenBlock<T> plain_block(const HiddenBlock<T>& original, ConvKernel<T> fused) {
  HiddenBlock<T> b;
  b.decoration = Decoration::None;
  b.activation = original.activation;
  b.use_bn = true;
  b.bn_main = BnParams<T>::identity(fused.cout, original.bn_main.eps);
  b.main = std::move(fused);
  return b;
}

template <typename T>
HiddenBlock<T> fuse_static_block(const HiddenBlock<T>& block) {
  switch (block.decoration) {
    case Decoration::TripleBranch: {
      std::vector<ConvKernel<T>> folded{fold_bn(block.main, block.bn_main)};
      for (const auto& br : block.extra_branches) folded.push_back(fold_bn(br.conv, br.bn));
      return plain_block(block, fuse_branches<T>(folded));
    }
    case Decoration::PointwiseChain: {
      std::vector<ConvKernel<T>> chain;
      for (const auto& pw : block.pw_chain) chain.push_back(fold_bn(pw.conv, pw.bn));
      return plain_block(block, fuse_pointwise_chain<T>(fold_bn(block.main, block.bn_main), chain));
    }
    default: return block;
  }
}

template <typename T>
HiddenBlock<T> fuse_gated_block(const HiddenBlock<T>& block, const std::vector<T>& coeff) {
  ConvKernel<T> k = fold_bn(block.main, block.bn_main);
  const std::size_t taps = k.k * k.k * k.cin;
  for (std::size_t co = 0; co < k.cout; ++co) {
    for (std::size_t r = 0; r < taps; ++r) k.weights[r * k.cout + co] *= coeff[co];
    k.bias[co] *= coeff[co];
  }
  return plain_block(block, std::move(k));
}

template <typename T>
Tensor<T> model_input(const Model<T>& model, const Tensor<T>& grid) {
  return model.spec.family == Family::PeMlp ? positional_encode(grid, model.spec.pe_octaves) : grid;
}

// Per-block deviation: both blocks see the original model's block input.
template <typename T>
std::vector<double> per_block_deviation(const Model<T>& original, const Model<T>& fused, const Tensor<T>& grid) {
  std::vector<double> dev;
  Tensor<T> x = model_input(original, grid);
  for (std::size_t n = 0; n < original.blocks.size(); ++n) {
    BlockForward<T> a = block_forward(original.blocks[n], x, Mode::Eval);
    const BlockForward<T> b = block_forward(fused.blocks[n], x, Mode::Eval);
    dev.push_back(max_abs_diff(a.y, b.y));
    x = std::move(a.y);
  }
  return dev;
}

template <typename T>
Tensor<T> default_probe_grid(const Model<T>& model) {
  if (model.fixed_grid) return make_coordinate_grid<T>(model.fixed_grid->height, model.fixed_grid->width);
  if (model.train_grid) return make_coordinate_grid<T>(model.train_grid->height, model.train_grid->width);
  return make_coordinate_grid<T>(32, 32);
}

template <typename T>
void finish_report(FusionResult<T>& r, const Model<T>& original, const Tensor<T>& probe) {
  r.report.params_before = original.parameter_count();
  r.report.params_after = r.model.parameter_count();
  r.report.block_deviation = per_block_deviation(original, r.model, probe);
  const Tensor<T> inputs[] = {probe};
  r.report.max_deviation = verify_equivalence<T>(original, r.model, inputs);
}

bool has_decoration(const auto& model, Decoration d) {
  return std::any_of(model.blocks.begin(), model.blocks.end(), [d](const auto& b) { return b.decoration == d; });
}

}  // namespace

template <typename T>
FusionResult<T> fuse_dynamic(const Model<T>& model, const Tensor<T>& grid) {
  model.validate();
  if (model.train_grid && (grid.height() != model.train_grid->height || grid.width() != model.train_grid->width)) {
    throw GridMismatch("fuse_dynamic: grid " + std::to_string(grid.height()) + "x" + std::to_string(grid.width()) +
                       " differs from the training grid " + std::to_string(model.train_grid->height) + "x" +
                       std::to_string(model.train_grid->width));
  }
  FusionResult<T> r{model, {}};
  r.report.pass = "dr";
  Tensor<T> x = model_input(model, grid);
  for (std::size_t n = 0; n < model.blocks.size(); ++n) {
    BlockForward<T> f = block_forward(model.blocks[n], x, Mode::Eval);
    if (model.blocks[n].decoration == Decoration::DynamicGate) {
      r.model.blocks[n] = fuse_gated_block(model.blocks[n], f.cache.coeff);
    } else {
      r.model.blocks[n] = fuse_static_block(model.blocks[n]);
    }
    x = std::move(f.y);
  }
  r.model.spec.decoration = Decoration::None;
  r.model.fixed_grid = GridShape{grid.height(), grid.width()};
  r.model.revision = 0;
  finish_report(r, model, grid);
  return r;
}

template <typename T>
FusionResult<T> fuse_model(const Model<T>& model, const std::optional<Tensor<T>>& grid) {
  model.validate();
  if (has_decoration(model, Decoration::DynamicGate)) {
    if (!grid) throw ShapeError("fuse_model: dynamic-gate models need the training grid");
    return fuse_dynamic(model, *grid);
  }
  FusionResult<T> r{model, {}};
  if (model.spec.decoration == Decoration::None && !has_decoration(model, Decoration::TripleBranch) &&
      !has_decoration(model, Decoration::PointwiseChain)) {
    r.report.pass = "none";
    r.report.params_before = r.report.params_after = model.parameter_count();
    r.report.block_deviation.assign(model.blocks.size(), 0.0);
    return r;
  }
  r.report.pass = to_string(model.spec.decoration);
  for (auto& b : r.model.blocks) b = fuse_static_block(b);
  r.model.spec.decoration = Decoration::None;
  r.model.revision = 0;
  finish_report(r, model, grid ? *grid : default_probe_grid(model));
  return r;
}

template <typename T>
double verify_equivalence(const Model<T>& a, const Model<T>& b, std::span<const Tensor<T>> inputs) {
  double dev = 0.0;
  for (const auto& x : inputs) {
    const Tensor<T> ya = model_predict(a, x);
    const Tensor<T> yb = model_predict(b, x);
    if (ya.shape() != yb.shape()) throw ShapeError("verify_equivalence: output shapes differ");
    dev = std::max(dev, max_abs_diff(ya, yb));
  }
  return dev;
}

#define INR_INSTANTIATE(T)                                                                           \
  template ConvKernel<T> fold_bn(const ConvKernel<T>&, const BnParams<T>&);                          \
  template ConvKernel<T> fuse_branches(std::span<const ConvKernel<T>>);                              \
  template ConvKernel<T> fuse_pointwise_chain(const ConvKernel<T>&, std::span<const ConvKernel<T>>); \
  template FusionResult<T> fuse_dynamic(const Model<T>&, const Tensor<T>&);                          \
  template FusionResult<T> fuse_model(const Model<T>&, const std::optional<Tensor<T>>&);             \
  template double verify_equivalence(const Model<T>&, const Model<T>&, std::span<const Tensor<T>>);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

}  // namespace inr
