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

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "inr/io.hpp"
#include "inr/reparam.hpp"
#include "oracles.hpp"

using namespace inr;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename F>
FormatError::Kind format_error_kind(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError thrown");
  return FormatError::Kind::Io;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("png pixel values") {
    const auto dir = oracle::scratch_dir("png");
    Tensor<float> img(1, 4, 3);
    const float vals[] = {1.0f, 1.0f, 1.0f, 0.0f, 0.0f, 0.0f, 1.5f, -0.5f, 0.5f, 0.2f, 0.4f, 0.6f};
    std::copy(std::begin(vals), std::end(vals), img.data());
    save_image(img, dir / "a.png");
    const auto back = load_image(dir / "a.png");
    REQUIRE(back.shape() == img.shape());
    CHECK(back(0, 0, 0) == 1.0f);
    CHECK(back(0, 1, 2) == 0.0f);
    CHECK(back(0, 2, 0) == 1.0f);
    CHECK(back(0, 2, 1) == 0.0f);
    CHECK(back(0, 2, 2) == 128.0f / 255.0f);
    CHECK(back(0, 3, 0) == 51.0f / 255.0f);
  }

  TEST_CASE("8-bit images survive a png round trip exactly") {
    const auto dir = oracle::scratch_dir("png_rt");
    Rng rng(1);
    Tensor<float> img(7, 9, 3);
    for (auto& v : img.values()) v = static_cast<float>(rng.next_u64() % 256) / 255.0f;
    save_image(img, dir / "b.png");
    CHECK(load_image(dir / "b.png") == img);
    Tensor<float> gray(3, 3, 1);
    gray.data()[4] = 1.0f;
    save_image(gray, dir / "g.png");
    CHECK(load_image(dir / "g.png") == gray);
    CHECK(format_error_kind([&] { save_image(Tensor<float>(2, 2, 2), dir / "c.png"); }) == FormatError::Kind::Unsupported);
    CHECK(format_error_kind([&] { (void)load_image(dir / "missing.png"); }) == FormatError::Kind::Io);
  }

  TEST_CASE("tensor file layout") {
    std::ostringstream os(std::ios::binary);
    Tensor<float> t(1, 1, 1);
    t.data()[0] = 1.0f;
    write_tensor(os, t);
    const std::string b = os.str();
    REQUIRE(b.size() == 23);
    CHECK(b.substr(0, 4) == "INRT");
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    CHECK(static_cast<unsigned char>(b[18]) == 32);
    // 1.0f little-endian.
    CHECK(static_cast<unsigned char>(b[21]) == 0x80);
    CHECK(static_cast<unsigned char>(b[22]) == 0x3f);
  }

  TEST_CASE("tensor round trips are bit exact") {
    const auto dir = oracle::scratch_dir("tensor");
    Rng rng(2);
    auto f = oracle::random_tensor<float>(rng, 3, 5, 2);
    f.data()[0] = -0.0f;
    f.data()[1] = std::numeric_limits<float>::denorm_min();
    save_tensor(f, dir / "f.inrt");
    const auto fb = load_tensor<float>(dir / "f.inrt");
    CHECK(std::memcmp(fb.data(), f.data(), f.numel() * sizeof(float)) == 0);
    CHECK(fb.shape() == f.shape());
    const auto d = oracle::random_tensor<double>(rng, 2, 2, 4);
    save_tensor(d, dir / "d.inrt");
    CHECK(load_tensor<double>(dir / "d.inrt") == d);
    CHECK(format_error_kind([&] { (void)load_tensor<float>(dir / "d.inrt"); }) == FormatError::Kind::Mismatch);
  }

  TEST_CASE("damaged tensor files") {
    const auto dir = oracle::scratch_dir("tensor_bad");
    Tensor<double> t(2, 2, 2);
    save_tensor(t, dir / "t.inrt");
    const std::string good = read_bytes(dir / "t.inrt");

    write_bytes(dir / "x.inrt", good.substr(0, good.size() - 3));
    CHECK(format_error_kind([&] { (void)load_tensor<double>(dir / "x.inrt"); }) == FormatError::Kind::Truncated);
    write_bytes(dir / "x.inrt", good.substr(0, 10));
    CHECK(format_error_kind([&] { (void)load_tensor<double>(dir / "x.inrt"); }) == FormatError::Kind::Truncated);
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(dir / "x.inrt", bad);
    CHECK(format_error_kind([&] { (void)load_tensor<double>(dir / "x.inrt"); }) == FormatError::Kind::BadMagic);
    bad = good;
    bad[4] = 9;
    write_bytes(dir / "x.inrt", bad);
    CHECK(format_error_kind([&] { (void)load_tensor<double>(dir / "x.inrt"); }) == FormatError::Kind::BadVersion);
    bad = good;
    bad[18] = 16;
    write_bytes(dir / "x.inrt", bad);
    CHECK(format_error_kind([&] { (void)load_tensor<double>(dir / "x.inrt"); }) == FormatError::Kind::Unsupported);
  }

  TEST_CASE("checkpoint round trip") {
    const auto dir = oracle::scratch_dir("ckpt");
    Rng rng(3);
    for (Family f : {Family::Mlp, Family::PeMlp, Family::Siren, Family::ConvInr}) {
      for (Decoration d : {Decoration::None, Decoration::TripleBranch, Decoration::PointwiseChain, Decoration::DynamicGate}) {
        if (f != Family::ConvInr && d != Decoration::None) continue;
        CAPTURE(to_string(f));
        CAPTURE(to_string(d));
        ModelSpec s;
        s.family = f;
        s.decoration = d;
        s.depth = 3;
        s.width = 5;
        s.pe_octaves = 3;
        auto m = build_model<float>(s, rng);
        if (m.blocks[0].use_bn) m.blocks[0].bn_main = oracle::random_bn<float>(rng, m.blocks[0].cout());
        m.train_grid = GridShape{17, 9};
        save_checkpoint(m, dir / "m.inrc");
        CHECK(checkpoint_precision(dir / "m.inrc") == 32);
        const auto back = load_checkpoint<float>(dir / "m.inrc");
        CHECK(back.spec == m.spec);
        CHECK(back.blocks == m.blocks);
        CHECK(back.head == m.head);
        CHECK(back.train_grid == m.train_grid);
        CHECK_FALSE(back.fixed_grid.has_value());
        save_checkpoint(back, dir / "m2.inrc");
        CHECK(read_bytes(dir / "m.inrc") == read_bytes(dir / "m2.inrc"));
      }
    }
  }

  TEST_CASE("damaged checkpoints are rejected") {
    const auto dir = oracle::scratch_dir("ckpt_bad");
    Rng rng(4);
    ModelSpec s;
    s.depth = 2;
    s.width = 4;
    save_checkpoint(build_model<double>(s, rng), dir / "m.inrc");
    CHECK(checkpoint_precision(dir / "m.inrc") == 64);
    CHECK(format_error_kind([&] { (void)load_checkpoint<float>(dir / "m.inrc"); }) == FormatError::Kind::Mismatch);
    const std::string good = read_bytes(dir / "m.inrc");
    std::string bad = good;
    bad[1] ^= 0x20;
    write_bytes(dir / "x.inrc", bad);
    CHECK(format_error_kind([&] { (void)load_checkpoint<double>(dir / "x.inrc"); }) == FormatError::Kind::BadMagic);
    write_bytes(dir / "x.inrc", good.substr(0, good.size() / 2));
    CHECK(format_error_kind([&] { (void)load_checkpoint<double>(dir / "x.inrc"); }) == FormatError::Kind::Truncated);
    bad = good;
    bad[4] = 7;
    write_bytes(dir / "x.inrc", bad);
    CHECK(format_error_kind([&] { (void)load_checkpoint<double>(dir / "x.inrc"); }) == FormatError::Kind::BadVersion);
    write_bytes(dir / "x.inrc", "");
    CHECK_THROWS_AS((void)load_checkpoint<double>(dir / "x.inrc"), FormatError);
  }

  TEST_CASE("fused checkpoints are smaller and keep the fixed grid") {
    const auto dir = oracle::scratch_dir("ckpt_fused");
    Rng rng(5);
    ModelSpec s;
    s.depth = 3;
    s.width = 6;
    s.decoration = Decoration::DynamicGate;
    auto m = build_model<float>(s, rng);
    m.train_grid = GridShape{8, 8};
    const auto fused = fuse_model<float>(m, make_coordinate_grid<float>(8, 8)).model;
    save_checkpoint(m, dir / "a.inrc");
    save_checkpoint(fused, dir / "b.inrc");
    CHECK(fs::file_size(dir / "b.inrc") < fs::file_size(dir / "a.inrc"));
    const auto back = load_checkpoint<float>(dir / "b.inrc");
    CHECK(back.fixed_grid == GridShape{8, 8});
    CHECK(back.blocks == fused.blocks);
  }

  TEST_CASE("loss csv") {
    const auto dir = oracle::scratch_dir("csv");
    write_loss_csv({{0, 0.5}, {10, 0.125}}, dir / "loss.csv");
    CHECK(read_bytes(dir / "loss.csv") == "iteration,loss\n0,0.5\n10,0.125\n");
  }
}
