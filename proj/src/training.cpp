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

#include "inr/training.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace inr {

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ShapeError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ShapeError("Adam betas must lie in [0, 1)");
  if (!(eps_adam > 0.0)) throw ShapeError("Adam eps must be > 0");
  if (log_every == 0) throw ShapeError("log_every must be >= 1");
  if (precision != 32 && precision != 64) throw ShapeError("precision must be 32 or 64");
}

template <typename T>
void adam_step(std::span<std::vector<T>* const> params, std::span<const std::vector<T>* const> grads,
               AdamState<T>& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient lists differ in length");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), T(0));
      state.v.emplace_back(p->size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  for (std::size_t n = 0; n < params.size(); ++n) {
    if (params[n]->size() != grads[n]->size() || state.m[n].size() != params[n]->size()) {
      throw ShapeError("adam_step: shape mismatch in parameter array " + std::to_string(n));
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t n = 0; n < params.size(); ++n) {
    std::vector<T>& p = *params[n];
    const std::vector<T>& g = *grads[n];
    std::vector<T>& m = state.m[n];
    std::vector<T>& v = state.v[n];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      p[i] = static_cast<T>(p[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam));
    }
  }
}

template <typename T>
void adam_step(Model<T>& model, const Model<T>& grads, AdamState<T>& state, const TrainConfig& cfg) {
  std::vector<std::vector<T>*> p;
  std::vector<const std::vector<T>*> g;
  model.for_each_parameter([&](std::vector<T>& v) { p.push_back(&v); });
  grads.for_each_parameter([&](const std::vector<T>& v) { g.push_back(&v); });
  adam_step<T>(std::span<std::vector<T>* const>(p), std::span<const std::vector<T>* const>(g), state, cfg);
  ++model.revision;
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
  if (a.shape() != b.shape()) throw ShapeError("psnr: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sum += d * d;
  }
  const double mse = a.numel() > 0 ? sum / static_cast<double>(a.numel()) : 0.0;
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::string format_psnr(double db) {
  if (std::isinf(db) && db > 0) return "inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << db;
  return os.str();
}

NonFiniteLoss::NonFiniteLoss(std::size_t iteration, double loss)
    : Error("non-finite loss " + std::to_string(loss) + " at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      loss_(loss) {}

namespace {

// Every iteration frees and reallocates the same multi-megabyte activations.
// glibc serves those with fresh mmaps by default; keeping them on the heap
// avoids a page-fault storm on each allocation.
void keep_large_allocations_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace

template <typename T>
FitResult<T> fit(const ModelSpec& spec, const Tensor<T>& target, const TrainConfig& cfg, const FitProgress& progress) {
  spec.validate();
  cfg.validate();
  if (target.channels() != spec.out_channels) {
    throw ShapeError("target has " + std::to_string(target.channels()) + " channels, model outputs " +
                     std::to_string(spec.out_channels));
  }
  for (T v : target.values()) {
    if (!(v >= T(0) && v <= T(1))) throw ShapeError("fit target values must lie in [0, 1]");
  }
  keep_large_allocations_on_heap();
  const auto start = std::chrono::steady_clock::now();

  Rng rng(cfg.seed);
  FitResult<T> result{build_model<T>(spec, rng), {}};
  Model<T>& model = result.model;
  FitReport& report = result.report;
  model.train_grid = GridShape{target.height(), target.width()};
  const Tensor<T> grid = make_coordinate_grid<T>(target.height(), target.width());

  AdamState<T> state;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    ModelForward<T> fwd = model_forward(model, grid, Mode::Train);
    LossResult<T> loss = mse_loss(fwd.pred, target);
    if (!std::isfinite(loss.loss)) throw NonFiniteLoss(it, loss.loss);
    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      report.history.push_back({it, loss.loss});
      if (progress) progress(it, loss.loss);
    }
    const Model<T> grads = model_backward(model, fwd.cache, loss.grad);
    adam_step(model, grads, state, cfg);
  }

  if (spec.uses_bn()) {
    const ModelForward<T> fwd = model_forward(model, grid, Mode::Train);
    freeze_statistics(model, fwd.cache);
    report.bn_stats_captured = true;
  }
  report.final_psnr = psnr(clamp_unit(model_predict(model, grid)), target);
  report.parameter_count = model.parameter_count();
  report.spec = spec;
  report.config = cfg;
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

#define INR_INSTANTIATE(T)                                                                                          \
  template void adam_step(std::span<std::vector<T>* const>, std::span<const std::vector<T>* const>, AdamState<T>&, \
                          const TrainConfig&);                                                                      \
  template void adam_step(Model<T>&, const Model<T>&, AdamState<T>&, const TrainConfig&);                           \
  template double psnr(const Tensor<T>&, const Tensor<T>&, double);                                                 \
  template FitResult<T> fit(const ModelSpec&, const Tensor<T>&, const TrainConfig&, const FitProgress&);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

}  // namespace inr
