// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// JSON run configuration for `bjdd train`. Every key is optional and
/// defaults to the TrainConfig value; unknown keys are rejected.
///
///   {
///     "seed": 0, "init_seed": 1, "steps": 1000, "batch_size": 8,
///     "d_steps_per_g": 1, "checkpoint_every": 0, "patch_size": 100, "augment": true,
///     "optimizer":   {"lr": 1e-4, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
///     "loss":        {"lambda_p": 1.0, "lambda_a": 0.001},
///     "degradation": {"sigma_min": 0, "sigma_max": 20, "clip": true, "pattern": "rggb"},
///     "generator":   {"res_blocks": 16, "trunk_width": 64, ...},
///     "discriminator": {"conv_layers": 8, "base_width": 64, ...},
///     "feature_extractor": {"widths": [32, 64, 128, 128], "seed": ...},
///     "batch_norm":  {"eps": 1e-5, "momentum": 0.1},
///     "paths":       {"data": "patches/", "out": "runs/a"}
///   }
///
/// Relative paths are resolved against the directory holding the file.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bjdd/training.hpp"

namespace bjdd {

struct RunConfig {
  TrainConfig train;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> out_dir;
};

/// Throws ConfigError on malformed JSON, unknown keys, wrong types or
/// invalid values.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON with every field spelled out.
std::string run_config_to_json(const RunConfig& config);

}  // namespace bjdd
