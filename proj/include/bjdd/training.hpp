// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Alternating adversarial training with Adam.
///
/// Each iteration draws a batch of random patches, degrades them with a
/// per-example noise level, takes `d_steps_per_g` discriminator steps and
/// then one generator step. Every random choice is keyed by (seed, index) so
/// a run is a pure function of its configuration and dataset.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "bjdd/cfa.hpp"
#include "bjdd/checkpoint.hpp"
#include "bjdd/losses.hpp"
#include "bjdd/models.hpp"

namespace bjdd {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const AdamOptions&) const = default;
};

/// Adam with bias correction over the trainable entries of one store.
/// Moments are kept in double precision; parameters are rounded once per step.
class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions options = {});

  /// Throws std::logic_error if a trainable parameter has no gradient.
  void step();

  std::uint64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  /// Moments of the i-th trainable parameter, in store order.
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<Tensor> params_;  // handles share storage with the store
  std::vector<std::vector<double>> m_, v_;
  AdamOptions options_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  AdamOptions adam;
  int batch_size = 8;
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  LossWeights weights;
  int d_steps_per_g = 1;
  /// Checkpoint period in steps; 0 writes only the initial and final ones.
  std::uint64_t checkpoint_every = 0;
  /// Per-example noise level is uniform in [sigma_min, sigma_max] (0-255 scale).
  double sigma_min = 0.0;
  double sigma_max = 20.0;
  bool clip = true;
  BayerPattern pattern;
  /// Random D4 transform per patch.
  bool augment = true;
  /// Side of the square target patches; the generator sees half of it.
  std::size_t patch_size = 100;
  std::uint64_t init_seed = 1;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  FeatureExtractorSpec features;
  BatchNormOptions batch_norm;

  /// Throws ConfigError.
  void validate() const;
  /// False when lambda_a == 0: the discriminator is then never built or run.
  bool adversarial() const noexcept { return weights.lambda_a > 0; }
};

struct TrainingBatch {
  Tensor inputs;   // (N,4,P/2,P/2)
  Tensor targets;  // (N,3,P,P)
  std::vector<double> sigmas;
  /// Key for train-mode dropout in the generator.
  std::uint64_t dropout_key = 0;
};

/// Batch `batch_index` of a run. Example e = batch_index * batch_size + b
/// draws its image, crop, transform and sigma from CounterRng(seed, e) and
/// its noise from a stream keyed by e.
TrainingBatch sample_batch(const std::vector<ColorImage>& dataset, const TrainConfig& config,
                           std::uint64_t batch_index);

/// Generator output for the discriminator is computed without graph history,
/// so only the discriminator receives gradients. Returns the loss value.
double train_step_discriminator(const TrainingBatch& batch, const Generator& generator,
                                Discriminator& discriminator, Adam& optimizer);

struct GeneratorLosses {
  double total = 0.0;
  double mse = 0.0;
  std::optional<double> perceptual;
  std::optional<double> adversarial;
};

/// `discriminator` may be null when lambda_a == 0. Its parameters and running
/// statistics are left bitwise unchanged.
GeneratorLosses train_step_generator(const TrainingBatch& batch, Generator& generator,
                                     Discriminator* discriminator, const FeatureExtractor& fx,
                                     const LossWeights& weights, Adam& optimizer);

struct TrainLogRow {
  std::uint64_t step = 0;
  std::optional<double> d_loss;
  GeneratorLosses g;
};

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

struct TrainOptions {
  /// Replace existing checkpoints and log in the output directory.
  bool overwrite = false;
  /// Called after every step.
  std::function<void(const TrainLogRow&)> on_step;
};

struct TrainResult {
  Generator generator;
  std::optional<Discriminator> discriminator;
  std::vector<TrainLogRow> log;
  std::vector<std::filesystem::path> checkpoints;
};

/// Checkpoint file name for a step, e.g. "checkpoint_000100.bjdd".
std::string checkpoint_name(std::uint64_t step);
inline constexpr const char* kTrainLogName = "train_log.csv";

ModelMetadata model_metadata(const TrainConfig& config, std::uint64_t step);

/// Writes checkpoint_000000.bjdd, periodic checkpoints, the final checkpoint
/// and train_log.csv into `out_dir` (created if missing). Log row k holds the
/// losses computed during update k, k = 1..steps.
///
/// Throws DataError for an empty dataset, patches larger than an image or an
/// unwritable or already populated output directory, NumericalError on NaN.
TrainResult train_loop(const std::vector<ColorImage>& dataset, const TrainConfig& config,
                       const std::filesystem::path& out_dir, const TrainOptions& options = {});

}  // namespace bjdd
