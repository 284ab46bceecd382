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

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#include <immintrin.h>
#endif

#include "inr/ops.hpp"

namespace inr {
namespace {

using std::ptrdiff_t;
using std::size_t;

template <typename T>
void check_conv_args(const Tensor<T>& x, const ConvKernel<T>& kernel) {
  kernel.validate();
  if (x.channels() != kernel.cin) {
    throw ShapeError("conv2d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                     std::to_string(kernel.cin));
  }
}

// One output pixel, any precision, any channel count. Skipping taps that land
// in the zero padding leaves the accumulator bit-identical to adding w * 0.
template <typename T>
void conv_pixel(const Tensor<T>& x, const ConvKernel<T>& kn, size_t i, size_t j, T* out) {
  const ptrdiff_t half = static_cast<ptrdiff_t>(kn.k / 2);
  const ptrdiff_t height = static_cast<ptrdiff_t>(x.height());
  const ptrdiff_t width = static_cast<ptrdiff_t>(x.width());
  const size_t cin = kn.cin;
  const size_t cout = kn.cout;
  std::copy(kn.bias.begin(), kn.bias.end(), out);
  for (size_t a = 0; a < kn.k; ++a) {
    const ptrdiff_t ii = static_cast<ptrdiff_t>(i) + static_cast<ptrdiff_t>(a) - half;
    if (ii < 0 || ii >= height) continue;
    for (size_t b = 0; b < kn.k; ++b) {
      const ptrdiff_t jj = static_cast<ptrdiff_t>(j) + static_cast<ptrdiff_t>(b) - half;
      if (jj < 0 || jj >= width) continue;
      const T* xp = x.pixel(static_cast<size_t>(ii), static_cast<size_t>(jj));
      const T* wp = kn.weights.data() + (a * kn.k + b) * cin * cout;
      for (size_t ci = 0; ci < cin; ++ci) {
        const T xv = xp[ci];
        const T* wr = wp + ci * cout;
        for (size_t co = 0; co < cout; ++co) out[co] = std::fma(wr[co], xv, out[co]);
      }
    }
  }
}

template <typename T>
void conv_generic(const Tensor<T>& x, const ConvKernel<T>& kn, Tensor<T>& out) {
  for (size_t i = 0; i < x.height(); ++i) {
    for (size_t j = 0; j < x.width(); ++j) conv_pixel(x, kn, i, j, out.pixel(i, j));
  }
}

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))

#if defined(__AVX512F__)
using Vec = __m512;
constexpr size_t kLanes = 16;
constexpr size_t kMaxVecs = 2;
constexpr size_t kPixelBlock = 8;
inline Vec vload(const float* p) { return _mm512_loadu_ps(p); }
inline void vstore(float* p, Vec v) { _mm512_storeu_ps(p, v); }
inline Vec vbroadcast(float v) { return _mm512_set1_ps(v); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm512_fmadd_ps(a, b, c); }
#else
using Vec = __m256;
constexpr size_t kLanes = 8;
constexpr size_t kMaxVecs = 4;
constexpr size_t kPixelBlock = 8;
inline Vec vload(const float* p) { return _mm256_loadu_ps(p); }
inline void vstore(float* p, Vec v) { _mm256_storeu_ps(p, v); }
inline Vec vbroadcast(float v) { return _mm256_set1_ps(v); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm256_fmadd_ps(a, b, c); }
#endif

// PB horizontally adjacent interior pixels starting at column j0, output
// channels [co0, co0 + NV * kLanes). Accumulators stay in registers; the
// per-element order (bias, then a, b, ci) matches conv_pixel exactly.
template <size_t NV, size_t PB>
void conv_block(const Tensor<float>& x, const ConvKernel<float>& kn, size_t i, size_t j0, size_t co0,
                Tensor<float>& out) {
  const size_t k = kn.k;
  const size_t half = k / 2;
  const size_t cin = kn.cin;
  const size_t cout = kn.cout;
  const float* w = kn.weights.data();
  Vec acc[PB][NV];
  for (size_t v = 0; v < NV; ++v) {
    const Vec b = vload(kn.bias.data() + co0 + v * kLanes);
    for (size_t p = 0; p < PB; ++p) acc[p][v] = b;
  }
  for (size_t a = 0; a < k; ++a) {
    const ptrdiff_t ii = static_cast<ptrdiff_t>(i + a) - static_cast<ptrdiff_t>(half);
    if (ii < 0 || ii >= static_cast<ptrdiff_t>(x.height())) continue;
    for (size_t b = 0; b < k; ++b) {
      const float* xrow = x.pixel(static_cast<size_t>(ii), j0 + b - half);
      const float* wp = w + (a * k + b) * cin * cout + co0;
      for (size_t ci = 0; ci < cin; ++ci) {
        Vec wv[NV];
        for (size_t v = 0; v < NV; ++v) wv[v] = vload(wp + ci * cout + v * kLanes);
        for (size_t p = 0; p < PB; ++p) {
          const Vec xv = vbroadcast(xrow[p * cin + ci]);
          for (size_t v = 0; v < NV; ++v) acc[p][v] = vfma(wv[v], xv, acc[p][v]);
        }
      }
    }
  }
  for (size_t p = 0; p < PB; ++p) {
    float* o = out.pixel(i, j0 + p) + co0;
    for (size_t v = 0; v < NV; ++v) vstore(o + v * kLanes, acc[p][v]);
  }
}

template <size_t PB>
void conv_block_dispatch(size_t nv, const Tensor<float>& x, const ConvKernel<float>& kn, size_t i, size_t j0,
                         size_t co0, Tensor<float>& out) {
  switch (nv) {
    case 1: conv_block<1, PB>(x, kn, i, j0, co0, out); break;
    case 2: conv_block<2, PB>(x, kn, i, j0, co0, out); break;
#if !defined(__AVX512F__)
    case 3: conv_block<3, PB>(x, kn, i, j0, co0, out); break;
    case 4: conv_block<4, PB>(x, kn, i, j0, co0, out); break;
#endif
    default: break;
  }
}

void conv_simd(const Tensor<float>& x, const ConvKernel<float>& kn, Tensor<float>& out) {
  const size_t half = kn.k / 2;
  const size_t width = x.width();
  const size_t lo = half;
  const size_t hi = width > half ? width - half : 0;
  for (size_t i = 0; i < x.height(); ++i) {
    size_t j = 0;
    for (; j < std::min(lo, width); ++j) conv_pixel(x, kn, i, j, out.pixel(i, j));
    for (; j + kPixelBlock <= hi; j += kPixelBlock) {
      for (size_t co0 = 0; co0 < kn.cout;) {
        const size_t nv = std::min(kMaxVecs, (kn.cout - co0) / kLanes);
        conv_block_dispatch<kPixelBlock>(nv, x, kn, i, j, co0, out);
        co0 += nv * kLanes;
      }
    }
    for (; j < hi; ++j) {
      for (size_t co0 = 0; co0 < kn.cout;) {
        const size_t nv = std::min(kMaxVecs, (kn.cout - co0) / kLanes);
        conv_block_dispatch<1>(nv, x, kn, i, j, co0, out);
        co0 += nv * kLanes;
      }
    }
    for (; j < width; ++j) conv_pixel(x, kn, i, j, out.pixel(i, j));
  }
}

bool simd_eligible(const ConvKernel<float>& kn) { return kn.cout % kLanes == 0; }

// Narrow outputs (e.g. the RGB head) run on a zero-padded copy of the kernel;
// the extra lanes are discarded and the real lanes keep the same order.
void conv_simd_padded(const Tensor<float>& x, const ConvKernel<float>& kn, Tensor<float>& out) {
  const size_t padded = (kn.cout + kLanes - 1) / kLanes * kLanes;
  ConvKernel<float> wide = ConvKernel<float>::zeros(kn.k, kn.cin, padded);
  for (size_t t = 0; t < kn.k * kn.k * kn.cin; ++t) {
    std::copy_n(kn.weights.data() + t * kn.cout, kn.cout, wide.weights.data() + t * padded);
  }
  std::copy(kn.bias.begin(), kn.bias.end(), wide.bias.begin());
  Tensor<float> tmp(x.height(), x.width(), padded);
  conv_simd(x, wide, tmp);
  for (size_t p = 0; p < x.pixels(); ++p) std::copy_n(tmp.data() + p * padded, kn.cout, out.data() + p * kn.cout);
}

// Weight gradient without im2col: dw[(a*k+b)*cin + ci][co] accumulates
// x[i+a-half, j+b-half, ci] * g[i, j, co] over valid taps. g has cout a
// multiple of kLanes. Rows are processed in strips so x and g stay cached.
constexpr size_t kAccRegs = kLanes == 16 ? 16 : 12;
constexpr size_t kStrip = 8;

template <size_t NV, size_t CB>
void wgrad_tile(const Tensor<float>& x, const Tensor<float>& g, size_t k, size_t a, size_t b, size_t i0, size_t i1,
                size_t ci0, size_t co0, float* dw) {
  const size_t half = k / 2;
  const size_t cin = x.channels();
  const size_t cout = g.channels();
  const size_t width = x.width();
  float* drow = dw + ((a * k + b) * cin + ci0) * cout + co0;
  Vec acc[CB][NV];
  for (size_t c = 0; c < CB; ++c) {
    for (size_t v = 0; v < NV; ++v) acc[c][v] = vload(drow + c * cout + v * kLanes);
  }
  const size_t j_lo = b < half ? half - b : 0;
  const size_t j_hi = std::min(width, width + half - b);
  for (size_t i = i0; i < i1; ++i) {
    const ptrdiff_t ii = static_cast<ptrdiff_t>(i + a) - static_cast<ptrdiff_t>(half);
    if (ii < 0 || ii >= static_cast<ptrdiff_t>(x.height())) continue;
    for (size_t j = j_lo; j < j_hi; ++j) {
      const float* gp = g.pixel(i, j) + co0;
      const float* xp = x.pixel(static_cast<size_t>(ii), j + b - half) + ci0;
      Vec gv[NV];
      for (size_t v = 0; v < NV; ++v) gv[v] = vload(gp + v * kLanes);
      for (size_t c = 0; c < CB; ++c) {
        const Vec xv = vbroadcast(xp[c]);
        for (size_t v = 0; v < NV; ++v) acc[c][v] = vfma(gv[v], xv, acc[c][v]);
      }
    }
  }
  for (size_t c = 0; c < CB; ++c) {
    for (size_t v = 0; v < NV; ++v) vstore(drow + c * cout + v * kLanes, acc[c][v]);
  }
}

template <size_t NV>
void wgrad_nv(const Tensor<float>& x, const Tensor<float>& g, size_t k, size_t a, size_t b, size_t i0, size_t i1,
              size_t co0, float* dw) {
  constexpr size_t kCb = kAccRegs / NV;
  size_t ci = 0;
  for (; ci + kCb <= x.channels(); ci += kCb) wgrad_tile<NV, kCb>(x, g, k, a, b, i0, i1, ci, co0, dw);
  for (; ci < x.channels(); ++ci) wgrad_tile<NV, 1>(x, g, k, a, b, i0, i1, ci, co0, dw);
}

void weight_grad_simd(const Tensor<float>& x, const Tensor<float>& g, size_t k, float* dw) {
  for (size_t i0 = 0; i0 < x.height(); i0 += kStrip) {
    const size_t i1 = std::min(x.height(), i0 + kStrip);
    for (size_t a = 0; a < k; ++a) {
      for (size_t b = 0; b < k; ++b) {
        for (size_t co0 = 0; co0 < g.channels();) {
          const size_t nv = std::min<size_t>(2, (g.channels() - co0) / kLanes);
          if (nv == 2) {
            wgrad_nv<2>(x, g, k, a, b, i0, i1, co0, dw);
          } else {
            wgrad_nv<1>(x, g, k, a, b, i0, i1, co0, dw);
          }
          co0 += nv * kLanes;
        }
      }
    }
  }
}

bool weight_grad_fast(const Tensor<float>& x, const Tensor<float>& g, ConvKernel<float>& grad) {
  const size_t cout = g.channels();
  const size_t rows = grad.k * grad.k * grad.cin;
  if (cout % kLanes == 0) {
    weight_grad_simd(x, g, grad.k, grad.weights.data());
    return true;
  }
  const size_t padded = (cout + kLanes - 1) / kLanes * kLanes;
  Tensor<float> gp(g.height(), g.width(), padded);
  for (size_t p = 0; p < g.pixels(); ++p) std::copy_n(g.data() + p * cout, cout, gp.data() + p * padded);
  std::vector<float> dw(rows * padded, 0.0f);
  weight_grad_simd(x, gp, grad.k, dw.data());
  for (size_t r = 0; r < rows; ++r) std::copy_n(dw.data() + r * padded, cout, grad.weights.data() + r * cout);
  return true;
}

#else

void conv_simd(const Tensor<float>& x, const ConvKernel<float>& kn, Tensor<float>& out) { conv_generic(x, kn, out); }
bool simd_eligible(const ConvKernel<float>&) { return false; }
void conv_simd_padded(const Tensor<float>& x, const ConvKernel<float>& kn, Tensor<float>& out) { conv_generic(x, kn, out); }
bool weight_grad_fast(const Tensor<float>&, const Tensor<float>&, ConvKernel<float>&) { return false; }

#endif

template <typename T>
void run_conv(const Tensor<T>& x, const ConvKernel<T>& kn, Tensor<T>& out) {
  if constexpr (std::is_same_v<T, float>) {
    if (simd_eligible(kn)) {
      conv_simd(x, kn, out);
    } else {
      conv_simd_padded(x, kn, out);
    }
    return;
  }
  conv_generic(x, kn, out);
}

// w'[a,b,co,ci] = w[k-1-a, k-1-b, ci, co], zero bias: the input gradient of a
// same-padded stride-1 convolution is the forward convolution with this kernel.
template <typename T>
ConvKernel<T> flipped_transpose(const ConvKernel<T>& kn) {
  ConvKernel<T> out = ConvKernel<T>::zeros(kn.k, kn.cout, kn.cin);
  for (size_t a = 0; a < kn.k; ++a) {
    for (size_t b = 0; b < kn.k; ++b) {
      for (size_t ci = 0; ci < kn.cin; ++ci) {
        for (size_t co = 0; co < kn.cout; ++co) out.w(a, b, co, ci) = kn.w(kn.k - 1 - a, kn.k - 1 - b, ci, co);
      }
    }
  }
  return out;
}

// Row p of the result holds the k*k*cin receptive field of pixel p in the
// kernel's (a, b, ci) order; padded taps are zero.
template <typename T>
std::vector<T> im2col(const Tensor<T>& x, size_t k) {
  const size_t half = k / 2;
  const size_t cin = x.channels();
  const size_t row = k * k * cin;
  std::vector<T> col(x.pixels() * row, T(0));
  for (size_t i = 0; i < x.height(); ++i) {
    for (size_t j = 0; j < x.width(); ++j) {
      T* dst = col.data() + (i * x.width() + j) * row;
      for (size_t a = 0; a < k; ++a) {
        const ptrdiff_t ii = static_cast<ptrdiff_t>(i + a) - static_cast<ptrdiff_t>(half);
        if (ii < 0 || ii >= static_cast<ptrdiff_t>(x.height())) continue;
        for (size_t b = 0; b < k; ++b) {
          const ptrdiff_t jj = static_cast<ptrdiff_t>(j + b) - static_cast<ptrdiff_t>(half);
          if (jj < 0 || jj >= static_cast<ptrdiff_t>(x.width())) continue;
          std::copy_n(x.pixel(static_cast<size_t>(ii), static_cast<size_t>(jj)), cin, dst + (a * k + b) * cin);
        }
      }
    }
  }
  return col;
}

// c (m x n) = a^T b with a (kdim x m), b (kdim x n), all row-major.
void gemm_tn(size_t m, size_t n, size_t kdim, const float* a, const float* b, float* c) {
  cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(kdim), 1.0f, a, static_cast<int>(m), b, static_cast<int>(n), 0.0f, c,
              static_cast<int>(n));
}

void gemm_tn(size_t m, size_t n, size_t kdim, const double* a, const double* b, double* c) {
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(kdim), 1.0, a, static_cast<int>(m), b, static_cast<int>(n), 0.0, c,
              static_cast<int>(n));
}

template <typename T>
void weight_grad_gemm(const Tensor<T>& x, const Tensor<T>& g, ConvKernel<T>& grad) {
  const size_t rows = grad.k * grad.k * grad.cin;
  if (grad.k == 1) {
    gemm_tn(rows, grad.cout, x.pixels(), x.data(), g.data(), grad.weights.data());
  } else {
    const std::vector<T> col = im2col(x, grad.k);
    gemm_tn(rows, grad.cout, x.pixels(), col.data(), g.data(), grad.weights.data());
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvKernel<T>& kernel) {
  check_conv_args(x, kernel);
  Tensor<T> out(x.height(), x.width(), kernel.cout);
  run_conv(x, kernel, out);
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const ConvKernel<T>& kernel,
                             bool need_input_grad) {
  check_conv_args(x, kernel);
  if (grad_out.height() != x.height() || grad_out.width() != x.width() || grad_out.channels() != kernel.cout) {
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape().str() + " inconsistent with input " +
                     x.shape().str() + " and cout " + std::to_string(kernel.cout));
  }
  ConvGrads<T> grads;
  grads.kernel = ConvKernel<T>::zeros(kernel.k, kernel.cin, kernel.cout);

  if (need_input_grad) {
    const ConvKernel<T> flipped = flipped_transpose(kernel);
    grads.input = Tensor<T>(x.height(), x.width(), kernel.cin);
    run_conv(grad_out, flipped, grads.input);
  }

  if constexpr (std::is_same_v<T, float>) {
    if (!weight_grad_fast(x, grad_out, grads.kernel)) weight_grad_gemm(x, grad_out, grads.kernel);
  } else {
    weight_grad_gemm(x, grad_out, grads.kernel);
  }

  T* gb = grads.kernel.bias.data();
  for (size_t p = 0; p < grad_out.pixels(); ++p) {
    const T* g = grad_out.data() + p * kernel.cout;
    for (size_t co = 0; co < kernel.cout; ++co) gb[co] += g[co];
  }
  return grads;
}

template Tensor<float> conv2d_forward(const Tensor<float>&, const ConvKernel<float>&);
template Tensor<double> conv2d_forward(const Tensor<double>&, const ConvKernel<double>&);
template ConvGrads<float> conv2d_backward(const Tensor<float>&, const Tensor<float>&, const ConvKernel<float>&, bool);
template ConvGrads<double> conv2d_backward(const Tensor<double>&, const Tensor<double>&, const ConvKernel<double>&,
                                           bool);

}  // namespace inr
