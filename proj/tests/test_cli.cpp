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

#include <fstream>
#include <map>
#include <sstream>

#include "inr/cli.hpp"
#include "inr/io.hpp"
#include "oracles.hpp"

using namespace inr;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

fs::path test_image(const fs::path& dir, std::size_t h, std::size_t w, std::uint64_t seed = 1) {
  Rng rng(seed);
  Tensor<float> img(h, w, 3);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < 3; ++c)
        img(i, j, c) = static_cast<float>(0.5 + 0.3 * std::sin(0.3 * static_cast<double>(i + 2 * j + c)) +
                                          0.1 * rng.uniform(-1.0, 1.0));
  const fs::path p = dir / ("img_" + std::to_string(h) + "x" + std::to_string(w) + ".png");
  save_image(img, p);
  return p;
}

std::vector<std::string> small_fit(const fs::path& image, const fs::path& out, const std::string& deco = "none") {
  return {"fit", "--image", image.string(), "--out", out.string(), "--depth", "2", "--width", "4",
          "--iters", "5", "--decoration", deco, "--lr", "1e-2"};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config precedence and validation") {
    const auto dir = oracle::scratch_dir("cli_cfg");
    auto cfg = cli::RunConfig::profile("desk");
    CHECK(cfg.get("depth") == "6");
    CHECK(cfg.get("iters") == "2000");
    CHECK(cli::RunConfig::profile("paper").get("depth") == "10");
    CHECK_THROWS_AS(cli::RunConfig::profile("laptop"), Error);

    std::ofstream(dir / "a.cfg") << "# comment\ndepth = 3\npe-octaves=4\n";
    const auto file = cli::RunConfig::from_file(dir / "a.cfg");
    cfg.merge(file);
    CHECK(cfg.get("depth") == "3");
    CHECK(cfg.get("pe_octaves") == "4");
    cfg.set("depth", "5");
    CHECK(cfg.model_spec().depth == 5);
    CHECK(cfg.model_spec().pe_octaves == 4);
    CHECK(cfg.train_config().iterations == 2000);
    CHECK(cfg.crop() == 128);
    CHECK(cfg.hf_cutoff() == 0.25);

    std::ofstream(dir / "b.cfg") << "colour=red\n";
    CHECK_THROWS_AS(cli::RunConfig::from_file(dir / "b.cfg"), Error);
    cfg.set("depth", "three");
    CHECK_THROWS_AS(cfg.model_spec(), Error);
    cfg.set("depth", "3");
    cfg.set("lr", "-1");
    CHECK_THROWS_AS(cfg.train_config(), Error);
  }

  TEST_CASE("argument errors exit with the config code") {
    const auto dir = oracle::scratch_dir("cli_args");
    CHECK(run_cli({"fit", "--bogus"}).code == cli::kInvalidConfig);
    CHECK(run_cli({"frobnicate"}).code == cli::kInvalidConfig);
    const auto missing = run_cli({"fit", "--out", (dir / "x").string()});
    CHECK(missing.code == cli::kInvalidConfig);
    CHECK(missing.err.find("--image") != std::string::npos);
    CHECK(run_cli({"fit", "--image", (dir / "none.png").string()}).code == cli::kInvalidConfig);
    CHECK(run_cli({"--help"}).code == cli::kOk);
    const auto img = test_image(dir, 16, 16);
    auto args = small_fit(img, dir / "x");
    args.insert(args.end(), {"--family", "cnn"});
    CHECK(run_cli(args).code == cli::kInvalidConfig);
  }

  TEST_CASE("fit writes its artifacts and is reproducible") {
    const auto dir = oracle::scratch_dir("cli_fit");
    const auto img = test_image(dir, 32, 40);
    const auto a = run_cli(small_fit(img, dir / "a"));
    REQUIRE(a.code == cli::kOk);
    CHECK(a.out.find("psnr=") != std::string::npos);
    for (const char* f : {"checkpoint.inrc", "recon.png", "loss.csv", "report.txt"}) CHECK(fs::exists(dir / "a" / f));
    const auto rep = parse_kv(read_text(dir / "a" / "report.txt"));
    CHECK(rep.at("iterations") == "5");
    CHECK(rep.at("image_size") == "32x40x3");
    CHECK(rep.at("bn_stats_captured") == "1");
    CHECK(rep.count("hf_ratio_target") == 1);
    CHECK(rep.at("config.depth") == "2");
    CHECK(load_image(dir / "a" / "recon.png").shape() == Shape{32, 40, 3});

    REQUIRE(run_cli(small_fit(img, dir / "b")).code == cli::kOk);
    CHECK(read_text(dir / "a" / "checkpoint.inrc") == read_text(dir / "b" / "checkpoint.inrc"));
    CHECK(read_text(dir / "a" / "loss.csv") == read_text(dir / "b" / "loss.csv"));
  }

  TEST_CASE("zero iterations and config files") {
    const auto dir = oracle::scratch_dir("cli_zero");
    const auto img = test_image(dir, 12, 12);
    std::ofstream(dir / "run.cfg") << "family=mlp\ndepth=2\nwidth=4\niters=0\nimage=" << img.string() << "\n";
    const auto r = run_cli({"fit", "--config", (dir / "run.cfg").string(), "--out", (dir / "o").string()});
    REQUIRE(r.code == cli::kOk);
    const auto rep = parse_kv(read_text(dir / "o" / "report.txt"));
    CHECK(rep.at("iterations") == "0");
    CHECK(rep.at("config.family") == "mlp");
    CHECK(rep.count("hf_ratio_target") == 0);
    // Flags beat the file.
    REQUIRE(run_cli({"fit", "--config", (dir / "run.cfg").string(), "--out", (dir / "p").string(), "--width", "3"}).code ==
            cli::kOk);
    CHECK(parse_kv(read_text(dir / "p" / "report.txt")).at("config.width") == "3");
  }

  TEST_CASE("divergence exits with the non-finite code") {
    const auto dir = oracle::scratch_dir("cli_nan");
    const auto img = test_image(dir, 8, 8);
    const auto r = run_cli({"fit", "--image", img.string(), "--out", (dir / "o").string(), "--family", "mlp", "--depth",
                            "3", "--width", "8", "--lr", "1e38", "--iters", "20"});
    CHECK(r.code == cli::kNonFiniteLoss);
    CHECK(r.err.find("error") != std::string::npos);
  }

  TEST_CASE("fuse certifies decorated checkpoints") {
    const auto dir = oracle::scratch_dir("cli_fuse");
    const auto img = test_image(dir, 16, 16);
    for (const std::string deco : {"sr", "wr", "dr"}) {
      CAPTURE(deco);
      const auto run_dir = dir / deco;
      REQUIRE(run_cli(small_fit(img, run_dir, deco)).code == cli::kOk);
      const auto r = run_cli({"fuse", "--checkpoint", (run_dir / "checkpoint.inrc").string()});
      REQUIRE(r.code == cli::kOk);
      const auto kv = parse_kv(r.out);
      CHECK(kv.at("fusion.certified") == "1");
      const fs::path fused = run_dir / "checkpoint_fused.inrc";
      REQUIRE(fs::exists(fused));
      CHECK(fs::exists(run_dir / "checkpoint_fused.inrc.report.txt"));
      CHECK(fs::file_size(fused) < fs::file_size(run_dir / "checkpoint.inrc"));
      const auto m = load_checkpoint<float>(fused);
      CHECK(m.spec.decoration == Decoration::None);

      const auto ev_a = run_cli({"eval", "--checkpoint", (run_dir / "checkpoint.inrc").string(), "--image", img.string(),
                                 "--out", (run_dir / "a.png").string()});
      const auto ev_b = run_cli({"eval", "--checkpoint", fused.string(), "--image", img.string(), "--out",
                                 (run_dir / "b.png").string()});
      REQUIRE(ev_a.code == cli::kOk);
      REQUIRE(ev_b.code == cli::kOk);
      CHECK(std::stod(parse_kv(ev_a.out).at("psnr_db")) ==
            doctest::Approx(std::stod(parse_kv(ev_b.out).at("psnr_db"))).epsilon(1e-4));

      // Fusing a fused checkpoint is a no-op.
      const auto again = run_cli({"fuse", "--checkpoint", fused.string()});
      CHECK(again.code == cli::kOk);
      CHECK(again.out.find("notice") != std::string::npos);
    }
    // The gate-frozen model only renders its training grid.
    const auto wrong = test_image(dir, 16, 20);
    const auto r = run_cli({"eval", "--checkpoint", (dir / "dr" / "checkpoint_fused.inrc").string(), "--image",
                            wrong.string(), "--out", (dir / "w.png").string()});
    CHECK(r.code == cli::kCertificationFailure);
  }

  TEST_CASE("fuse rejects damaged checkpoints") {
    const auto dir = oracle::scratch_dir("cli_fuse_bad");
    std::ofstream(dir / "bad.inrc") << "INRX garbage";
    CHECK(run_cli({"fuse", "--checkpoint", (dir / "bad.inrc").string()}).code == cli::kInvalidConfig);
    CHECK(run_cli({"fuse", "--checkpoint", (dir / "missing.inrc").string()}).code == cli::kInvalidConfig);
    CHECK(run_cli({"fuse"}).code == cli::kInvalidConfig);
  }

  TEST_CASE("eval reproduces the fitted psnr") {
    const auto dir = oracle::scratch_dir("cli_eval");
    const auto img = test_image(dir, 20, 20);
    REQUIRE(run_cli(small_fit(img, dir / "a")).code == cli::kOk);
    const auto fit_db = std::stod(parse_kv(read_text(dir / "a" / "report.txt")).at("psnr_db"));
    const auto ev = run_cli({"eval", "--checkpoint", (dir / "a" / "checkpoint.inrc").string(), "--image", img.string()});
    REQUIRE(ev.code == cli::kOk);
    CHECK(std::abs(std::stod(parse_kv(ev.out).at("psnr_db")) - fit_db) <= 0.01);
    CHECK(fs::exists(dir / "a" / "eval_recon.png"));

    const auto same = run_cli({"eval", "--image", img.string(), "--compare", img.string()});
    CHECK(same.code == cli::kOk);
    CHECK(parse_kv(same.out).at("psnr_db") == "inf");
    const auto other = test_image(dir, 20, 24);
    CHECK(run_cli({"eval", "--image", img.string(), "--compare", other.string()}).code == cli::kInvalidConfig);
    CHECK(run_cli({"eval", "--image", img.string()}).code == cli::kInvalidConfig);
  }

  TEST_CASE("spectrum writes one csv per image") {
    const auto dir = oracle::scratch_dir("cli_spectrum");
    const auto a = test_image(dir, 40, 64);
    const auto b = test_image(dir, 32, 32, 2);
    const auto r = run_cli({"spectrum", "--image", a.string(), b.string(), "--out", dir.string(), "--bins", "16"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("hf_ratio") != std::string::npos);
    CHECK(fs::exists(dir / "img_40x64_spectrum.csv"));
    CHECK(fs::exists(dir / "img_32x32_spectrum.csv"));
    std::ifstream is(dir / "img_32x32_spectrum.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(is, line);) ++lines;
    CHECK(lines == 17);

    const auto tiny = test_image(dir, 16, 64);
    CHECK(run_cli({"spectrum", "--image", tiny.string(), "--out", dir.string()}).code == cli::kInvalidConfig);
  }
}
