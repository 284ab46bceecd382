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

#ifndef INR_SPECTRUM_HPP
#define INR_SPECTRUM_HPP

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "inr/tensor.hpp"

namespace inr {

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::span<std::complex<double>> data, bool inverse = false);

bool is_power_of_two(std::size_t n);

/// Per-channel 2D FFT magnitudes averaged over channels, zero frequency moved
/// to (H/2, W/2). H and W must be powers of two.
template <typename T>
Tensor<double> fft2d_magnitude(const Tensor<T>& image);

struct SpectrumProfile {
  std::size_t n_bins = 0;
  double hf_cutoff = 0.25;
  /// Mean squared magnitude per radial bin (0 for empty bins).
  std::vector<double> radial_energy;
  std::vector<std::size_t> counts;
  double total_energy = 0.0;
  /// Energy strictly above the cutoff radius over all non-DC energy.
  double hf_ratio = 0.0;
};

/// Bins squared magnitudes of a centered spectrum by normalized radius
/// r = distance from (H/2, W/2) / distance to the (0, 0) corner.
SpectrumProfile radial_profile(const Tensor<double>& spectrum, std::size_t n_bins, double hf_cutoff = 0.25);

/// Center crop to the largest power-of-two square that fits.
template <typename T>
Tensor<T> crop_pow2_square(const Tensor<T>& image);

void write_profile_csv(const SpectrumProfile& profile, const std::filesystem::path& path);

}  // namespace inr

#endif  // INR_SPECTRUM_HPP
