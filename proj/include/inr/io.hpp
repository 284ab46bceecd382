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

// File formats. All multi-byte fields are little-endian regardless of host.
//
// Tensor ("INRT"):
//   magic "INRT" | u16 version | u32 height | u32 width | u32 channels |
//   u8 precision (32 or 64) | values, row-major, channel innermost
//
// Checkpoint ("INRC"):
//   magic "INRC" | u16 version | model spec | grids | u32 array count |
//   one INRT record (1 x 1 x n) per array: per block its learnable arrays then
//   its BN statistics, then the output layer's weights and bias.

#ifndef INR_IO_HPP
#define INR_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "inr/model.hpp"
#include "inr/tensor.hpp"
#include "inr/training.hpp"

namespace inr {

class FormatError : public Error {
 public:
  enum class Kind { Io, BadMagic, BadVersion, Truncated, Mismatch, Unsupported };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint16_t kTensorFormatVersion = 1;
inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

/// 8-bit PNG, gray or RGB, mapped to [0, 1] by v / 255.
Tensor<float> load_image(const std::filesystem::path& path);

/// Clamps to [0, 1] and quantizes with round-half-away-from-zero. 1 or 3 channels.
template <typename T>
void save_image(const Tensor<T>& image, const std::filesystem::path& path);

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);
template <typename T>
Tensor<T> read_tensor(std::istream& is);

template <typename T>
void save_tensor(const Tensor<T>& t, const std::filesystem::path& path);
template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path);
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path);

/// Precision tag stored in a checkpoint header (32 or 64).
int checkpoint_precision(const std::filesystem::path& path);

void write_loss_csv(const std::vector<LossSample>& history, const std::filesystem::path& path);

}  // namespace inr

#endif  // INR_IO_HPP
