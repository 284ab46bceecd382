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

#include "inr/spectrum.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "inr/io.hpp"

namespace inr {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ShapeError("fft: length " + std::to_string(n) + " is not a power of two");

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + len / 2] * w;
        data[start + k] = u + v;
        data[start + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    for (auto& v : data) v /= static_cast<double>(n);
  }
}

template <typename T>
Tensor<double> fft2d_magnitude(const Tensor<T>& image) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw ShapeError("fft2d_magnitude: dimensions " + image.shape().str() + " are not powers of two");
  }
  if (image.channels() == 0) throw ShapeError("fft2d_magnitude: image has no channels");
  Tensor<double> out(h, w, 1);
  std::vector<std::complex<double>> plane(h * w);
  std::vector<std::complex<double>> column(h);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) plane[i * w + j] = static_cast<double>(image(i, j, c));
      fft_radix2(std::span(plane).subspan(i * w, w));
    }
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t i = 0; i < h; ++i) column[i] = plane[i * w + j];
      fft_radix2(column);
      for (std::size_t i = 0; i < h; ++i) plane[i * w + j] = column[i];
    }
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out((i + h / 2) % h, (j + w / 2) % w, 0) += std::abs(plane[i * w + j]);
      }
    }
  }
  for (auto& v : out.values()) v /= static_cast<double>(image.channels());
  return out;
}

SpectrumProfile radial_profile(const Tensor<double>& spectrum, std::size_t n_bins, double hf_cutoff) {
  if (n_bins == 0) throw ShapeError("radial_profile: n_bins must be positive");
  if (spectrum.channels() != 1) throw ShapeError("radial_profile: expected a single-channel spectrum");
  SpectrumProfile p;
  p.n_bins = n_bins;
  p.hf_cutoff = hf_cutoff;
  p.radial_energy.assign(n_bins, 0.0);
  p.counts.assign(n_bins, 0);

  const double ci = static_cast<double>(spectrum.height() / 2);
  const double cj = static_cast<double>(spectrum.width() / 2);
  const double max_r = std::hypot(ci, cj);
  double ac = 0.0;
  double high = 0.0;
  for (std::size_t i = 0; i < spectrum.height(); ++i) {
    for (std::size_t j = 0; j < spectrum.width(); ++j) {
      const double e = spectrum(i, j, 0) * spectrum(i, j, 0);
      const double dist = std::hypot(static_cast<double>(i) - ci, static_cast<double>(j) - cj);
      const double r = max_r > 0.0 ? dist / max_r : 0.0;
      const std::size_t bin = std::min(n_bins - 1, static_cast<std::size_t>(r * static_cast<double>(n_bins)));
      p.radial_energy[bin] += e;
      ++p.counts[bin];
      p.total_energy += e;
      if (dist > 0.0) ac += e;
      if (r > hf_cutoff) high += e;
    }
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (p.counts[b] > 0) p.radial_energy[b] /= static_cast<double>(p.counts[b]);
  }
  p.hf_ratio = ac > 0.0 ? high / ac : 0.0;
  return p;
}

template <typename T>
Tensor<T> crop_pow2_square(const Tensor<T>& image) {
  std::size_t side = 1;
  const std::size_t limit = std::min(image.height(), image.width());
  if (limit == 0) throw ShapeError("crop_pow2_square: empty image");
  while (side * 2 <= limit) side *= 2;
  return center_crop(image, side, side);
}

void write_profile_csv(const SpectrumProfile& profile, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
  os << "bin,r_lo,r_hi,count,mean_energy\n";
  char line[160];
  for (std::size_t b = 0; b < profile.n_bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(profile.n_bins);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(profile.n_bins);
    std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%zu,%.9g\n", b, lo, hi, profile.counts[b], profile.radial_energy[b]);
    os << line;
  }
  if (!os) throw FormatError(FormatError::Kind::Io, "write failed: " + path.string());
}

template Tensor<double> fft2d_magnitude(const Tensor<float>&);
template Tensor<double> fft2d_magnitude(const Tensor<double>&);
template Tensor<float> crop_pow2_square(const Tensor<float>&);
template Tensor<double> crop_pow2_square(const Tensor<double>&);

}  // namespace inr
