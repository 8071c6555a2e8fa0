// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

// bjdd: degrade, train, infer and eval from the command line.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bjdd/cfa.hpp"
#include "bjdd/checkpoint.hpp"
#include "bjdd/config.hpp"
#include "bjdd/errors.hpp"
#include "bjdd/metrics.hpp"
#include "bjdd/png_io.hpp"
#include "bjdd/training.hpp"

namespace fs = std::filesystem;
using namespace bjdd;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
  std::string input, output, pattern = "rggb";
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool no_clip = false;
  bool force = false;
};

Archive packed_archive(const PackedInput& packed, const std::string& source, const BayerPattern& pattern,
                       const DegradationSpec& spec, std::uint64_t index) {
  nlohmann::json meta = {{"format", "bjdd-packed"}, {"source", source},   {"pattern", pattern.name()},
                         {"sigma", spec.sigma},     {"seed", spec.seed}, {"index", index},
                         {"clip", spec.clip}};
  Archive archive{meta.dump(), {}};
  std::vector<float> data(packed.values().begin(), packed.values().end());
  archive.tensors.push_back({"packed", {4, packed.height(), packed.width()}, std::move(data)});
  return archive;
}

PackedInput packed_from_archive(const Archive& archive, const std::string& path, BayerPattern* pattern) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(archive.metadata);
  } catch (const nlohmann::json::exception&) {
    throw DataError(path + ": metadata is not JSON");
  }
  if (!meta.is_object() || meta.value("format", "") != "bjdd-packed" || archive.tensors.size() != 1 ||
      archive.tensors[0].shape.size() != 3 || archive.tensors[0].shape[0] != 4) {
    throw DataError(path + ": not a packed input archive");
  }
  if (pattern) *pattern = BayerPattern::parse(meta.value("pattern", "rggb"));
  const auto& t = archive.tensors[0];
  PackedInput packed(t.shape[1], t.shape[2]);
  std::copy(t.data.begin(), t.data.end(), packed.values().begin());
  return packed;
}

BayerPattern parse_pattern(const std::string& name) {
  try {
    return BayerPattern::parse(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int run_degrade(const DegradeArgs& a) {
  const BayerPattern pattern = parse_pattern(a.pattern);
  if (!(a.sigma >= 0)) throw UsageError("--sigma must be >= 0");
  const auto files = list_png_files(a.input);
  if (files.empty()) throw DataError("no PNG files in " + a.input);
  if (!a.force) {
    for (const auto& f : files) {
      const fs::path target = fs::path(a.output) / (f.stem().string() + "_packed.bjdd");
      if (fs::exists(target)) throw UsageError(target.string() + " exists; pass --force to overwrite");
    }
  }
  ensure_directory(a.output);
  const DegradationSpec spec{a.sigma, a.seed, !a.no_clip};
  for (std::size_t i = 0; i < files.size(); ++i) {
    const ColorImage image = load_png(files[i]);
    const BayerMosaic noisy = add_gaussian_noise(mosaic(image, pattern), spec, i);
    const std::string stem = files[i].stem().string();
    save_mosaic_png(fs::path(a.output) / (stem + "_mosaic.png"), noisy);
    save_archive(fs::path(a.output) / (stem + "_packed.bjdd"),
                 packed_archive(pack_raw(noisy, pattern), files[i].filename().string(), pattern, spec, i), a.force);
  }
  std::printf("degraded %zu image(s) into %s\n", files.size(), a.output.c_str());
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, out;
  bool force = false;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  RunConfig rc = load_run_config(a.config);
  if (!a.data.empty()) rc.data_dir = a.data;
  if (!a.out.empty()) rc.out_dir = a.out;
  if (!rc.data_dir) throw UsageError("no data directory: pass --data or set paths.data");
  if (!rc.out_dir) throw UsageError("no output directory: pass --out or set paths.out");
  if (!a.force && fs::is_directory(*rc.out_dir)) {
    for (const auto& entry : fs::directory_iterator(*rc.out_dir)) {
      const std::string name = entry.path().filename().string();
      if (name == kTrainLogName || name.rfind("checkpoint_", 0) == 0) {
        throw UsageError(rc.out_dir->string() + " already holds " + name + "; pass --force to overwrite");
      }
    }
  }
  std::vector<ColorImage> dataset;
  for (auto& named : load_png_directory(*rc.data_dir)) dataset.push_back(std::move(named.image));

  ensure_directory(*rc.out_dir);
  {
    const fs::path path = *rc.out_dir / "run_config.json";
    std::ofstream out(path, std::ios::trunc);
    out << run_config_to_json(rc);
    if (!out) throw DataError("cannot write " + path.string());
  }

  TrainOptions options;
  options.overwrite = a.force;
  const std::uint64_t every = std::max<std::uint64_t>(1, rc.train.steps / 20);
  if (!a.quiet) {
    options.on_step = [&](const TrainLogRow& row) {
      if (row.step % every != 0 && row.step != rc.train.steps) return;
      std::printf("step %llu  g_total %.6g  g_mse %.6g", static_cast<unsigned long long>(row.step), row.g.total,
                  row.g.mse);
      if (row.d_loss) std::printf("  d_loss %.6g", *row.d_loss);
      std::printf("\n");
      std::fflush(stdout);
    };
  }
  const TrainResult result = train_loop(dataset, rc.train, *rc.out_dir, options);
  std::printf("wrote %zu checkpoint(s) and %s to %s\n", result.checkpoints.size(), kTrainLogName,
              rc.out_dir->string().c_str());
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string model, input, output;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
};

int run_infer(const InferArgs& a) {
  const Model model = load_model(a.model);
  std::vector<fs::path> inputs;
  if (fs::is_directory(a.input)) {
    for (const auto& entry : fs::directory_iterator(a.input)) {
      const std::string ext = lower(entry.path().extension().string());
      if (entry.is_regular_file() && (ext == ".png" || ext == ".bjdd")) inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end(),
              [](const fs::path& x, const fs::path& y) { return x.filename().string() < y.filename().string(); });
    if (inputs.empty()) throw DataError("no PNG or packed inputs in " + a.input);
  } else if (fs::is_regular_file(a.input)) {
    inputs.push_back(a.input);
  } else {
    throw DataError("input not found: " + a.input);
  }
  if (a.sigma && !(*a.sigma >= 0)) throw UsageError("--sigma must be >= 0");
  ensure_directory(a.output);
  const DegradationSpec spec{a.sigma.value_or(0.0), a.seed, true};
  const BayerPattern& pattern = model.metadata.pattern;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const fs::path& path = inputs[i];
    PackedInput packed;
    if (lower(path.extension().string()) == ".bjdd") {
      BayerPattern stored;
      packed = packed_from_archive(load_archive(path), path.string(), &stored);
      if (!(stored == pattern)) throw DataError(path.string() + ": CFA pattern differs from the model's");
      if (a.sigma) throw UsageError("--sigma cannot be applied to an already packed input");
    } else {
      const Png8 png = read_png_file(path);
      BayerMosaic m;
      if (png.channels == 3) {
        ColorImage rgb;
        static_cast<PlanarImage&>(rgb) = from_png8(png);
        m = mosaic(rgb, pattern);
      } else {
        static_cast<PlanarImage&>(m) = from_png8(png);
      }
      if (m.height() % 2 != 0 || m.width() % 2 != 0) throw DataError(path.string() + ": dimensions must be even");
      packed = pack_raw(add_gaussian_noise(m, spec, i), pattern);
    }
    Tensor out;
    {
      NoGradGuard no_grad;
      out = generator_forward(model.generator, stack_images(std::span<const PackedInput>(&packed, 1)));
    }
    detail::require_finite(out.data(), "generator output");
    ColorImage rgb = color_image_from_batch(out, 0);
    clip_unit(rgb);
    std::string stem = path.stem().string();
    if (stem.size() > 7 && stem.ends_with("_packed")) stem.resize(stem.size() - 7);
    save_png(fs::path(a.output) / (stem + ".png"), rgb);
  }
  std::printf("reconstructed %zu image(s) into %s\n", inputs.size(), a.output.c_str());
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, data, report;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t crop = 0;
};

int run_eval(const EvalArgs& a) {
  if (!(a.sigma >= 0)) throw UsageError("--sigma must be >= 0");
  const MetricsTable table = evaluate_dataset(a.model, a.data, a.sigma, a.seed, a.crop);
  const fs::path report(a.report);
  if (report.has_parent_path()) ensure_directory(report.parent_path());
  std::ofstream out(report, std::ios::trunc);
  if (!out) throw DataError("cannot write " + a.report);
  write_metrics_csv(out, table);
  out.close();
  if (!out) throw DataError("write failed for " + a.report);
  const MetricsRow& avg = table.average;
  std::printf("%zu image(s)  CPSNR %.4f dB  SSIM %.6f  (R %.4f G %.4f B %.4f)\n", table.rows.size(), avg.cpsnr,
              avg.ssim, avg.rpsnr, avg.gpsnr, avg.bpsnr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint demosaicing and denoising with a generative adversarial network"};
  app.require_subcommand(1);

  DegradeArgs degrade;
  auto* cmd_degrade = app.add_subcommand("degrade", "Simulate noisy Bayer observations of RGB PNGs");
  cmd_degrade->add_option("--input", degrade.input, "Directory of RGB PNG images")->required();
  cmd_degrade->add_option("--output", degrade.output, "Output directory")->required();
  cmd_degrade->add_option("--sigma", degrade.sigma, "Noise standard deviation on the 0-255 scale")->required();
  cmd_degrade->add_option("--seed", degrade.seed, "Noise seed")->required();
  cmd_degrade->add_option("--pattern", degrade.pattern, "CFA pattern: rggb, grbg, gbrg or bggr");
  cmd_degrade->add_flag("--no-clip", degrade.no_clip, "Keep noisy values outside [0,1] in the packed output");
  cmd_degrade->add_flag("--force", degrade.force, "Overwrite existing packed archives");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Train a model from a JSON run configuration");
  cmd_train->add_option("--config", train.config, "Run configuration (JSON)")->required();
  cmd_train->add_option("--data", train.data, "Directory of RGB PNG training images");
  cmd_train->add_option("--out", train.out, "Output directory for checkpoints and the log");
  cmd_train->add_flag("--force", train.force, "Overwrite existing checkpoints");
  cmd_train->add_flag("--quiet", train.quiet, "No progress output");

  InferArgs infer;
  auto* cmd_infer = app.add_subcommand("infer", "Reconstruct RGB images from mosaics");
  cmd_infer->add_option("--model", infer.model, "Checkpoint")->required();
  cmd_infer->add_option("--input", infer.input,
                        "RGB PNG (mosaicked first), grayscale mosaic PNG, packed archive, or a directory of them")
      ->required();
  cmd_infer->add_option("--output", infer.output, "Output directory")->required();
  cmd_infer->add_option("--sigma", infer.sigma, "Add noise of this level before reconstructing");
  cmd_infer->add_option("--seed", infer.seed, "Noise seed");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Degrade, reconstruct and score a directory of RGB PNGs");
  cmd_eval->add_option("--model", eval.model, "Checkpoint")->required();
  cmd_eval->add_option("--data", eval.data, "Directory of RGB PNG ground truth images")->required();
  cmd_eval->add_option("--sigma", eval.sigma, "Noise standard deviation on the 0-255 scale")->required();
  cmd_eval->add_option("--seed", eval.seed, "Noise seed")->required();
  cmd_eval->add_option("--report", eval.report, "CSV report path")->required();
  cmd_eval->add_option("--crop", eval.crop, "Ignore this many border pixels in every metric");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*cmd_degrade) return run_degrade(degrade);
    if (*cmd_train) return run_train(train);
    if (*cmd_infer) return run_infer(infer);
    if (*cmd_eval) return run_eval(eval);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "bjdd: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "bjdd: configuration error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "bjdd: numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bjdd: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
