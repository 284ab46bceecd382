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

#ifndef INR_TRAINING_HPP
#define INR_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "inr/model.hpp"

namespace inr {

/// Deterministic uniform stream: 64-bit Mersenne Twister (mt19937_64, whose
/// output sequence is fixed by the C++ standard), top 53 bits scaled by 2^-53.
/// No standard distribution objects are used, so streams match across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one draw per call, two uniforms consumed).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 mix of (seed, index); used for per-run streams in sweeps.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct TrainConfig {
  std::size_t iterations = 2000;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 1;
  std::size_t log_every = 10;
  int precision = 32;

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t t = 0;
};

/// One Adam update over a list of parameter arrays:
///   t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
template <typename T>
void adam_step(std::span<std::vector<T>* const> params, std::span<const std::vector<T>* const> grads,
               AdamState<T>& state, const TrainConfig& cfg);

/// Adam over every learnable array of a model; bumps model.revision.
template <typename T>
void adam_step(Model<T>& model, const Model<T>& grads, AdamState<T>& state, const TrainConfig& cfg);

/// Infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

std::string format_psnr(double db);

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t iteration, double loss);
  std::size_t iteration() const { return iteration_; }
  double loss() const { return loss_; }

 private:
  std::size_t iteration_;
  double loss_;
};

struct LossSample {
  std::size_t iteration = 0;
  double loss = 0.0;
  bool operator==(const LossSample&) const = default;
};

struct FitReport {
  std::vector<LossSample> history;
  double final_psnr = 0.0;
  double wall_time_s = 0.0;
  std::size_t parameter_count = 0;
  ModelSpec spec;
  TrainConfig config;
  bool bn_stats_captured = false;
};

template <typename T>
struct FitResult {
  Model<T> model;
  FitReport report;
};

/// Called every log interval with (iteration, loss).
using FitProgress = std::function<void(std::size_t, double)>;

/// Full-batch fit of `target` (values in [0,1]) on its own pixel-center grid.
/// Afterwards one Train-mode pass records BN statistics, which are frozen so
/// the returned model is ready for Eval-mode inference.
template <typename T>
FitResult<T> fit(const ModelSpec& spec, const Tensor<T>& target, const TrainConfig& cfg, const FitProgress& progress = {});

}  // namespace inr

#endif  // INR_TRAINING_HPP
