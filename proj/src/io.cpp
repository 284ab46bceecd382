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

#include "inr/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace inr {
namespace {

using Kind = FormatError::Kind;

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(Kind::Truncated, std::string("truncated file while reading ") + what);
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is, const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(is, what)); }

void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  is.read(got, 4);
  if (is.gcount() != 4) throw FormatError(Kind::Truncated, "truncated file while reading magic");
  if (std::memcmp(got, magic, 4) != 0) {
    throw FormatError(Kind::BadMagic, std::string("bad magic, expected ") + magic);
  }
}

template <typename T>
constexpr std::uint8_t precision_tag() {
  return sizeof(T) == 4 ? 32 : 64;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(Kind::Io, "cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(Kind::Io, "cannot open " + path.string() + " for reading");
  return is;
}

void finish_write(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw FormatError(Kind::Io, "write failed: " + path.string());
}

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

Tensor<float> load_image(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError(Kind::Io, "cannot read PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(Kind::Unsupported, "cannot decode PNG " + path.string() + ": " + msg);
  }
  Tensor<float> out(image.height, image.width, channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) out.data()[i] = static_cast<float>(buffer[i]) / 255.0f;
  return out;
}

template <typename T>
void save_image(const Tensor<T>& image, const std::filesystem::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError(Kind::Unsupported, "save_image supports 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  std::vector<png_byte> buffer(image.numel());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image.data()[i]), 0.0, 1.0);
    buffer[i] = static_cast<png_byte>(std::round(v * 255.0));
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = u32(image.width());
  png.height = u32(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw FormatError(Kind::Io, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  put_magic(os, "INRT");
  put_le<std::uint16_t>(os, kTensorFormatVersion);
  put_le(os, u32(t.height()));
  put_le(os, u32(t.width()));
  put_le(os, u32(t.channels()));
  put_le<std::uint8_t>(os, precision_tag<T>());
  for (T v : t.values()) {
    if constexpr (sizeof(T) == 4) {
      put_le(os, std::bit_cast<std::uint32_t>(v));
    } else {
      put_le(os, std::bit_cast<std::uint64_t>(v));
    }
  }
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  expect_magic(is, "INRT");
  const auto version = get_le<std::uint16_t>(is, "tensor version");
  if (version != kTensorFormatVersion) {
    throw FormatError(Kind::BadVersion, "unsupported tensor format version " + std::to_string(version));
  }
  Shape shape;
  shape.height = get_le<std::uint32_t>(is, "tensor height");
  shape.width = get_le<std::uint32_t>(is, "tensor width");
  shape.channels = get_le<std::uint32_t>(is, "tensor channels");
  const auto tag = get_le<std::uint8_t>(is, "tensor precision");
  if (tag != 32 && tag != 64) throw FormatError(Kind::Unsupported, "unknown precision tag " + std::to_string(tag));
  if (tag != precision_tag<T>()) {
    throw FormatError(Kind::Mismatch, "tensor stored at " + std::to_string(tag) + "-bit precision, requested " +
                                          std::to_string(precision_tag<T>()) + "-bit");
  }
  std::vector<T> data(shape.numel());
  for (auto& v : data) {
    if constexpr (sizeof(T) == 4) {
      v = std::bit_cast<float>(get_le<std::uint32_t>(is, "tensor values"));
    } else {
      v = std::bit_cast<double>(get_le<std::uint64_t>(is, "tensor values"));
    }
  }
  return Tensor<T>(shape, std::move(data));
}

template <typename T>
void save_tensor(const Tensor<T>& t, const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  write_tensor(os, t);
  finish_write(os, path);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_tensor<T>(is);
}

namespace {

void write_grid(std::ostream& os, const std::optional<GridShape>& g) {
  put_le<std::uint8_t>(os, g ? 1 : 0);
  put_le(os, u32(g ? g->height : 0));
  put_le(os, u32(g ? g->width : 0));
}

std::optional<GridShape> read_grid(std::istream& is) {
  const auto present = get_le<std::uint8_t>(is, "grid flag");
  const std::size_t h = get_le<std::uint32_t>(is, "grid height");
  const std::size_t w = get_le<std::uint32_t>(is, "grid width");
  if (!present) return std::nullopt;
  return GridShape{h, w};
}

struct CheckpointHeader {
  ModelSpec spec;
  int precision = 32;
  std::optional<GridShape> train_grid;
  std::optional<GridShape> fixed_grid;
};

CheckpointHeader read_header(std::istream& is) {
  expect_magic(is, "INRC");
  const auto version = get_le<std::uint16_t>(is, "checkpoint version");
  if (version != kCheckpointFormatVersion) {
    throw FormatError(Kind::BadVersion, "unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointHeader h;
  const auto family = get_le<std::uint8_t>(is, "family");
  if (family > static_cast<int>(Family::ConvInr)) throw FormatError(Kind::Mismatch, "unknown model family in checkpoint");
  h.spec.family = static_cast<Family>(family);
  h.spec.depth = get_le<std::uint32_t>(is, "depth");
  h.spec.width = get_le<std::uint32_t>(is, "width");
  h.spec.kernel = get_le<std::uint32_t>(is, "kernel");
  const auto deco = get_le<std::uint8_t>(is, "decoration");
  if (deco > static_cast<int>(Decoration::DynamicGate)) throw FormatError(Kind::Mismatch, "unknown decoration in checkpoint");
  h.spec.decoration = static_cast<Decoration>(deco);
  h.spec.expand = get_le<std::uint32_t>(is, "expand");
  h.spec.pe_octaves = get_le<std::uint32_t>(is, "pe_octaves");
  h.spec.omega0 = get_f64(is, "omega0");
  h.spec.in_channels = get_le<std::uint32_t>(is, "in_channels");
  h.spec.out_channels = get_le<std::uint32_t>(is, "out_channels");
  h.precision = get_le<std::uint8_t>(is, "precision");
  h.train_grid = read_grid(is);
  h.fixed_grid = read_grid(is);
  try {
    h.spec.validate();
  } catch (const ShapeError& e) {
    throw FormatError(Kind::Mismatch, std::string("checkpoint holds an invalid model spec: ") + e.what());
  }
  return h;
}

template <typename T>
std::vector<std::vector<T>*> checkpoint_arrays(Model<T>& m) {
  std::vector<std::vector<T>*> arrays;
  auto push = [&](std::vector<T>& v) { arrays.push_back(&v); };
  for (auto& b : m.blocks) {
    b.for_each_parameter(push);
    b.for_each_statistic(push);
  }
  push(m.head.weights);
  push(m.head.bias);
  return arrays;
}

}  // namespace

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  model.validate();
  std::ostringstream os(std::ios::binary);
  put_magic(os, "INRC");
  put_le<std::uint16_t>(os, kCheckpointFormatVersion);
  const ModelSpec& s = model.spec;
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.family));
  put_le(os, u32(s.depth));
  put_le(os, u32(s.width));
  put_le(os, u32(s.kernel));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.decoration));
  put_le(os, u32(s.expand));
  put_le(os, u32(s.pe_octaves));
  put_f64(os, s.omega0);
  put_le(os, u32(s.in_channels));
  put_le(os, u32(s.out_channels));
  put_le<std::uint8_t>(os, precision_tag<T>());
  write_grid(os, model.train_grid);
  write_grid(os, model.fixed_grid);

  Model<T> copy = model;
  const auto arrays = checkpoint_arrays(copy);
  put_le(os, u32(arrays.size()));
  for (const auto* a : arrays) write_tensor(os, Tensor<T>(Shape{1, 1, a->size()}, *a));

  std::ofstream out = open_out(path);
  const std::string bytes = os.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish_write(out, path);
}

template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  const CheckpointHeader h = read_header(is);
  if (h.precision != precision_tag<T>()) {
    throw FormatError(Kind::Mismatch, "checkpoint stored at " + std::to_string(h.precision) + "-bit precision");
  }
  Model<T> m = empty_model<T>(h.spec);
  m.train_grid = h.train_grid;
  m.fixed_grid = h.fixed_grid;
  const auto arrays = checkpoint_arrays(m);
  const auto count = get_le<std::uint32_t>(is, "array count");
  if (count != arrays.size()) {
    throw FormatError(Kind::Mismatch, "checkpoint holds " + std::to_string(count) + " arrays, spec needs " +
                                          std::to_string(arrays.size()));
  }
  for (std::size_t n = 0; n < arrays.size(); ++n) {
    Tensor<T> t = read_tensor<T>(is);
    if (t.numel() != arrays[n]->size()) {
      throw FormatError(Kind::Mismatch, "checkpoint array " + std::to_string(n) + " has " + std::to_string(t.numel()) +
                                            " values, spec needs " + std::to_string(arrays[n]->size()));
    }
    std::copy(t.values().begin(), t.values().end(), arrays[n]->begin());
  }
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw FormatError(Kind::Mismatch, std::string("checkpoint weights are inconsistent: ") + e.what());
  }
  return m;
}

int checkpoint_precision(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_header(is).precision;
}

void write_loss_csv(const std::vector<LossSample>& history, const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "iteration,loss\n";
  char line[64];
  for (const auto& s : history) {
    std::snprintf(line, sizeof(line), "%zu,%.9g\n", s.iteration, s.loss);
    os << line;
  }
  finish_write(os, path);
}

#define INR_INSTANTIATE(T)                                                  \
  template void save_image(const Tensor<T>&, const std::filesystem::path&); \
  template void write_tensor(std::ostream&, const Tensor<T>&);              \
  template Tensor<T> read_tensor<T>(std::istream&);                         \
  template void save_tensor(const Tensor<T>&, const std::filesystem::path&); \
  template Tensor<T> load_tensor<T>(const std::filesystem::path&);          \
  template void save_checkpoint(const Model<T>&, const std::filesystem::path&); \
  template Model<T> load_checkpoint<T>(const std::filesystem::path&);

INR_INSTANTIATE(float)
INR_INSTANTIATE(double)

}  // namespace inr
