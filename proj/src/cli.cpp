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

#include "inr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "inr/io.hpp"
#include "inr/reparam.hpp"
#include "inr/spectrum.hpp"

namespace inr::cli {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kKeys = {"family", "depth", "width",     "kernel",    "decoration", "pe_octaves",
                                        "omega0", "iters", "lr",        "seed",      "image",      "out",
                                        "crop",   "log_every", "precision", "hf_cutoff"};

std::size_t parse_count(const std::string& key, const std::string& text) {
  unsigned long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ShapeError("invalid value for " + key + ": '" + text + "' (expected a non-negative integer)");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw ShapeError("invalid value for " + key + ": '" + text + "' (expected a real number)");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

// Center crop to at most `crop` x `crop`; 0 disables cropping.
Tensor<float> apply_crop(const Tensor<float>& image, std::size_t crop) {
  if (crop == 0) return image;
  return center_crop(image, std::min(crop, image.height()), std::min(crop, image.width()));
}

std::string layer_summary(const ModelSpec& spec) {
  std::string s;
  for (const auto& l : spec.layers()) s += (s.empty() ? "" : " ") + l.str();
  return s;
}

double hf_ratio_of(const Tensor<float>& image, double cutoff) {
  return radial_profile(fft2d_magnitude(crop_pow2_square(image)), 64, cutoff).hf_ratio;
}

// ---------------------------------------------------------------------------
// fit

struct FitFlags {
  std::string profile = "desk";
  std::optional<std::string> config;
  std::map<std::string, std::optional<std::string>> values;
  bool verbose = false;
};

template <typename T>
int run_fit(const RunConfig& cfg, const ModelSpec& spec, const TrainConfig& tc, const Tensor<float>& image,
            bool verbose, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.get("out");
  fs::create_directories(dir);
  const Tensor<T> target = image.cast<T>();

  FitProgress progress;
  if (verbose) {
    progress = [&err](std::size_t it, double loss) { err << "iter " << it << " loss " << sci(loss) << "\n"; };
  }
  FitResult<T> r = fit<T>(spec, target, tc, progress);

  const Tensor<T> grid = make_coordinate_grid<T>(target.height(), target.width());
  const Tensor<float> recon = clamp_unit(model_predict(r.model, grid)).template cast<float>();
  save_checkpoint(r.model, dir / "checkpoint.inrc");
  save_image(recon, dir / "recon.png");
  write_loss_csv(r.report.history, dir / "loss.csv");

  std::ostringstream rep;
  rep << "psnr_db=" << format_psnr(r.report.final_psnr) << "\n";
  rep << "parameter_count=" << r.report.parameter_count << "\n";
  rep << "iterations=" << tc.iterations << "\n";
  rep << "final_loss=" << (r.report.history.empty() ? std::string("none") : sci(r.report.history.back().loss)) << "\n";
  rep << "bn_stats_captured=" << (r.report.bn_stats_captured ? 1 : 0) << "\n";
  rep << "image_size=" << target.height() << "x" << target.width() << "x" << target.channels() << "\n";
  if (std::min(target.height(), target.width()) >= 32) {
    rep << "hf_ratio_target=" << fixed(hf_ratio_of(image, cfg.hf_cutoff()), 6) << "\n";
    rep << "hf_ratio_recon=" << fixed(hf_ratio_of(recon, cfg.hf_cutoff()), 6) << "\n";
  }
  rep << "layers=" << layer_summary(spec) << "\n";
  for (const auto& [k, v] : cfg.values()) rep << "config." << k << "=" << v << "\n";
  rep << "wall_time_s=" << fixed(r.report.wall_time_s, 3) << "\n";

  std::ofstream report(dir / "report.txt", std::ios::trunc);
  report << rep.str();
  if (!report) throw FormatError(FormatError::Kind::Io, "cannot write " + (dir / "report.txt").string());

  out << "fit " << to_string(spec.family) << " (" << to_string(spec.decoration) << ") " << target.height() << "x"
      << target.width() << " iters=" << tc.iterations << " psnr=" << format_psnr(r.report.final_psnr)
      << " dB params=" << r.report.parameter_count << " -> " << dir.string() << "\n";
  return kOk;
}

int cmd_fit(const FitFlags& flags, const CLI::App& app, std::ostream& out, std::ostream& err) {
  RunConfig cfg = RunConfig::profile(flags.profile);
  if (flags.config) cfg.merge(RunConfig::from_file(*flags.config));
  for (const auto& [key, value] : flags.values) {
    if (value) cfg.set(key, *value);
  }
  if (!cfg.has("image")) {
    err << "error: --image is required (flag or config key 'image')\n" << app.help();
    return kInvalidConfig;
  }
  // Validate everything before loading data.
  ModelSpec spec = cfg.model_spec();
  const TrainConfig tc = cfg.train_config();
  const std::size_t crop = cfg.crop();
  const double cutoff = cfg.hf_cutoff();
  (void)cutoff;
  spec.validate();
  tc.validate();

  const Tensor<float> image = apply_crop(load_image(cfg.get("image")), crop);
  spec.out_channels = image.channels();
  if (tc.precision == 64) return run_fit<double>(cfg, spec, tc, image, flags.verbose, out, err);
  return run_fit<float>(cfg, spec, tc, image, flags.verbose, out, err);
}

// ---------------------------------------------------------------------------
// fuse

struct FuseFlags {
  std::string checkpoint;
  std::optional<std::string> out;
  std::optional<double> tolerance;
  std::uint64_t seed = 7;
};

template <typename T>
std::vector<Tensor<T>> probe_inputs(const Model<T>& model, const std::optional<Tensor<T>>& grid, bool dynamic,
                                    std::uint64_t seed) {
  std::vector<Tensor<T>> inputs;
  if (grid) inputs.push_back(*grid);
  if (dynamic) return inputs;
  Rng rng(seed);
  const std::pair<std::size_t, std::size_t> sizes[] = {{5, 7}, {16, 16}, {23, 11}};
  for (auto [h, w] : sizes) {
    Tensor<T> x(h, w, model.spec.in_channels);
    for (auto& v : x.values()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    inputs.push_back(std::move(x));
  }
  return inputs;
}

template <typename T>
int run_fuse(const FuseFlags& flags, std::ostream& out, std::ostream& err) {
  const Model<T> model = load_checkpoint<T>(flags.checkpoint);
  const bool decorated = std::any_of(model.blocks.begin(), model.blocks.end(),
                                     [](const auto& b) { return b.decoration != Decoration::None; });
  if (!decorated) {
    out << "notice: " << flags.checkpoint << " has no reparameterization decorations; nothing to fuse\n";
    return kOk;
  }
  const bool dynamic = model.spec.decoration == Decoration::DynamicGate;
  std::optional<Tensor<T>> grid;
  if (model.train_grid) grid = make_coordinate_grid<T>(model.train_grid->height, model.train_grid->width);
  if (dynamic && !grid) {
    err << "error: dynamic-gate checkpoint does not record its training grid\n";
    return kInvalidConfig;
  }
  FusionResult<T> r = fuse_model(model, grid);
  const std::vector<Tensor<T>> inputs = probe_inputs(model, grid, dynamic, flags.seed);
  r.report.max_deviation = std::max(r.report.max_deviation, verify_equivalence<T>(model, r.model, inputs));
  const double tol = flags.tolerance.value_or(sizeof(T) == 4 ? 1e-4 : 1e-9);

  fs::path dst = flags.out ? fs::path(*flags.out)
                           : fs::path(flags.checkpoint).parent_path() /
                                 (fs::path(flags.checkpoint).stem().string() + "_fused.inrc");
  const bool certified = r.report.max_deviation <= tol;
  std::ostringstream rep;
  rep << r.report.to_text();
  rep << "fusion.tolerance=" << sci(tol) << "\n";
  rep << "fusion.probe_inputs=" << inputs.size() << "\n";
  rep << "fusion.certified=" << (certified ? 1 : 0) << "\n";
  out << rep.str();

  fs::path report_path = dst;
  report_path += ".report.txt";
  std::ofstream report(report_path, std::ios::trunc);
  report << rep.str();

  if (!certified) {
    err << "error: fused model deviates by " << sci(r.report.max_deviation) << " > tolerance " << sci(tol) << "\n";
    return kCertificationFailure;
  }
  save_checkpoint(r.model, dst);
  out << "fused checkpoint written to " << dst.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::optional<std::string> checkpoint;
  std::string image;
  std::optional<std::string> compare;
  std::optional<std::string> out;
  std::size_t crop = 0;
};

template <typename T>
int run_eval(const EvalFlags& flags, const Tensor<float>& reference, std::ostream& out) {
  const Model<T> model = load_checkpoint<T>(*flags.checkpoint);
  if (reference.channels() != model.spec.out_channels) {
    throw ShapeError("reference has " + std::to_string(reference.channels()) + " channels, model outputs " +
                     std::to_string(model.spec.out_channels));
  }
  const Tensor<T> grid = make_coordinate_grid<T>(reference.height(), reference.width());
  const Tensor<T> pred = clamp_unit(model_predict(model, grid));
  const double db = psnr(pred, reference.cast<T>());
  const fs::path dst = flags.out ? fs::path(*flags.out) : fs::path(*flags.checkpoint).parent_path() / "eval_recon.png";
  save_image(pred, dst);
  out << "psnr_db=" << format_psnr(db) << "\n";
  return kOk;
}

int cmd_eval(const EvalFlags& flags, std::ostream& out, std::ostream& err) {
  const Tensor<float> reference = apply_crop(load_image(flags.image), flags.crop);
  if (flags.compare) {
    const Tensor<float> other = apply_crop(load_image(*flags.compare), flags.crop);
    if (other.shape() != reference.shape()) {
      err << "error: images differ in shape: " << reference.shape().str() << " vs " << other.shape().str() << "\n";
      return kInvalidConfig;
    }
    out << "psnr_db=" << format_psnr(psnr(other, reference)) << "\n";
    return kOk;
  }
  if (!flags.checkpoint) {
    err << "error: eval needs --checkpoint or --compare\n";
    return kInvalidConfig;
  }
  if (checkpoint_precision(*flags.checkpoint) == 64) return run_eval<double>(flags, reference, out);
  return run_eval<float>(flags, reference, out);
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumFlags {
  std::vector<std::string> images;
  std::string out = ".";
  std::size_t bins = 64;
  double hf_cutoff = 0.25;
};

int cmd_spectrum(const SpectrumFlags& flags, std::ostream& out, std::ostream& err) {
  if (flags.bins == 0) throw ShapeError("--bins must be positive");
  if (!(flags.hf_cutoff >= 0.0 && flags.hf_cutoff <= 1.0)) throw ShapeError("--hf-cutoff must lie in [0, 1]");
  struct Row {
    std::string name;
    std::size_t side;
    double hf;
  };
  std::vector<Row> rows;
  fs::create_directories(flags.out);
  for (const auto& path : flags.images) {
    const Tensor<float> image = load_image(path);
    if (std::min(image.height(), image.width()) < 32) {
      err << "error: " << path << " is smaller than 32x32\n";
      return kInvalidConfig;
    }
    const Tensor<float> square = crop_pow2_square(image);
    const SpectrumProfile profile = radial_profile(fft2d_magnitude(square), flags.bins, flags.hf_cutoff);
    write_profile_csv(profile, fs::path(flags.out) / (fs::path(path).stem().string() + "_spectrum.csv"));
    rows.push_back({fs::path(path).filename().string(), square.height(), profile.hf_ratio});
  }
  char line[256];
  std::snprintf(line, sizeof(line), "%-32s %6s %9s\n", "image", "size", "hf_ratio");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-32s %6zu %9.3f\n", r.name.c_str(), r.side, r.hf);
    out << line;
  }
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

const std::vector<std::string>& RunConfig::keys() { return kKeys; }

RunConfig RunConfig::profile(const std::string& name) {
  RunConfig c;
  c.values_ = {{"family", "conv-inr"}, {"depth", "6"},      {"width", "32"},   {"kernel", "3"},
               {"decoration", "none"}, {"pe_octaves", "10"}, {"omega0", "30"}, {"iters", "2000"},
               {"lr", "2e-4"},         {"seed", "1"},        {"out", "run"},   {"crop", "128"},
               {"log_every", "10"},    {"precision", "32"},  {"hf_cutoff", "0.25"}};
  if (name == "paper") {
    c.values_["depth"] = "10";
    c.values_["iters"] = "100000";
    c.values_["crop"] = "0";
  } else if (name != "desk") {
    throw ShapeError("unknown profile '" + name + "' (expected desk or paper)");
  }
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(FormatError::Kind::Io, "cannot read config file " + path.string());
  RunConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) throw ShapeError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

void RunConfig::merge(const RunConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ShapeError("configuration key '" + key + "' is not set");
  return it->second;
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec s;
  s.family = parse_family(get("family"));
  s.depth = parse_count("depth", get("depth"));
  s.width = parse_count("width", get("width"));
  s.kernel = parse_count("kernel", get("kernel"));
  s.decoration = parse_decoration(get("decoration"));
  s.pe_octaves = parse_count("pe_octaves", get("pe_octaves"));
  s.omega0 = parse_real("omega0", get("omega0"));
  s.validate();
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.iterations = parse_count("iters", get("iters"));
  t.lr = parse_real("lr", get("lr"));
  t.seed = parse_count("seed", get("seed"));
  t.log_every = parse_count("log_every", get("log_every"));
  t.precision = static_cast<int>(parse_count("precision", get("precision")));
  t.validate();
  return t;
}

std::size_t RunConfig::crop() const { return parse_count("crop", get("crop")); }

double RunConfig::hf_cutoff() const {
  const double v = parse_real("hf_cutoff", get("hf_cutoff"));
  if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("hf_cutoff must lie in [0, 1]");
  return v;
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Implicit neural representations: fit, fuse, evaluate, analyze spectra", "inr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  FitFlags fit_flags;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model to an image");
  fit->add_option("--profile", fit_flags.profile, "Default set: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  fit->add_option("--config", fit_flags.config, "Flat key=value config file");
  fit->add_flag("--verbose", fit_flags.verbose, "Print the loss every log interval to stderr");
  const std::pair<const char*, const char*> fit_opts[] = {
      {"--family", "mlp | pe-mlp | siren | conv-inr"},
      {"--depth", "Hidden-layer count"},
      {"--width", "Channels per hidden layer"},
      {"--kernel", "Conv-INR kernel size (odd)"},
      {"--decoration", "none | sr | wr | dr"},
      {"--pe-octaves", "Positional-encoding octaves"},
      {"--omega0", "SIREN frequency"},
      {"--iters", "Adam iterations"},
      {"--lr", "Learning rate"},
      {"--seed", "Random seed"},
      {"--image", "Target PNG"},
      {"--out", "Output directory"},
      {"--crop", "Center-crop side (0 = full image)"},
      {"--log-every", "Loss logging interval"},
      {"--precision", "32 or 64"},
      {"--hf-cutoff", "Normalized radius for the high-frequency ratio"},
  };
  for (const auto& [flag, help] : fit_opts) {
    std::string key = std::string(flag).substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    fit->add_option(flag, fit_flags.values[key], help);
  }

  FuseFlags fuse_flags;
  CLI::App* fuse = app.add_subcommand("fuse", "Fold reparameterization structure into plain convolutions");
  fuse->add_option("--checkpoint", fuse_flags.checkpoint, "Decorated checkpoint")->required();
  fuse->add_option("--out", fuse_flags.out, "Fused checkpoint path (default <name>_fused.inrc)");
  fuse->add_option("--tolerance", fuse_flags.tolerance, "Max allowed deviation (default 1e-4, 1e-9 at 64-bit)");
  fuse->add_option("--seed", fuse_flags.seed, "Seed for the random probe inputs");

  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval", "Render a checkpoint at a reference image's resolution and report PSNR");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint to render");
  eval->add_option("--image", eval_flags.image, "Reference PNG")->required();
  eval->add_option("--compare", eval_flags.compare, "Compare against this PNG instead of rendering a checkpoint");
  eval->add_option("--out", eval_flags.out, "Where to write the rendered PNG");
  eval->add_option("--crop", eval_flags.crop, "Center-crop side applied to the reference (0 = full image)");

  SpectrumFlags spec_flags;
  CLI::App* spectrum = app.add_subcommand("spectrum", "Radial Fourier profiles and high-frequency energy ratios");
  spectrum->add_option("--image", spec_flags.images, "PNG images")->required();
  spectrum->add_option("--out", spec_flags.out, "Directory for the profile CSVs");
  spectrum->add_option("--bins", spec_flags.bins, "Radial bins");
  spectrum->add_option("--hf-cutoff", spec_flags.hf_cutoff, "Normalized cutoff radius");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInvalidConfig;
  }

  try {
    if (*fit) return cmd_fit(fit_flags, *fit, out, err);
    if (*fuse) {
      if (checkpoint_precision(fuse_flags.checkpoint) == 64) return run_fuse<double>(fuse_flags, out, err);
      return run_fuse<float>(fuse_flags, out, err);
    }
    if (*eval) return cmd_eval(eval_flags, out, err);
    if (*spectrum) return cmd_spectrum(spec_flags, out, err);
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << "\n";
    return kNonFiniteLoss;
  } catch (const GridMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kCertificationFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
  return kInvalidConfig;
}

}  // namespace inr::cli
