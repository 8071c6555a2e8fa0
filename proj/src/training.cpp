// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/training.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "bjdd/errors.hpp"
#include "bjdd/rng.hpp"

namespace bjdd {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kNoiseStream = 0x4E015E;
constexpr std::uint64_t kDropoutStream = 0xD20F;
constexpr std::uint64_t kDiscriminatorInit = 0xD15C;

void require_finite_loss(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericalError(std::string(what) + " is not finite");
}

/// Turns off requires_grad on every trainable parameter of a store for the
/// guard's lifetime, so a backward pass neither reaches nor accumulates
/// into them.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParameterStore* store) : store_(store) {
    if (!store_) return;
    for (auto& e : store_->entries())
      if (e.kind == ParameterStore::Kind::Parameter) e.tensor.set_requires_grad(false);
  }
  ~FreezeGuard() {
    if (!store_) return;
    for (auto& e : store_->entries())
      if (e.kind == ParameterStore::Kind::Parameter) e.tensor.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParameterStore* store_;
};

template <typename Fn>
void rethrow_as_config(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void write_optional(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", *v);
    out << buf;
  }
}

}  // namespace

void AdamOptions::validate() const {
  if (!(lr > 0)) throw ConfigError("optimizer: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("optimizer: beta1 must lie in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("optimizer: beta2 must lie in [0,1)");
  if (!(eps > 0)) throw ConfigError("optimizer: eps must be positive");
}

Adam::Adam(ParameterStore& store, AdamOptions options) : options_(options) {
  options_.validate();
  for (auto& e : store.entries()) {
    if (e.kind != ParameterStore::Kind::Parameter) continue;
    params_.push_back(e.tensor);
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.has_grad()) throw std::logic_error("Adam::step: a parameter has no gradient");
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto theta = params_[i].mutable_data();
    const auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k];
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double update = options_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.eps);
      theta[k] = static_cast<Real>(theta[k] - update);
    }
  }
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (d_steps_per_g < 1) throw ConfigError("d_steps_per_g must be >= 1");
  if (!(sigma_min >= 0 && sigma_min <= sigma_max) || !std::isfinite(sigma_max)) {
    throw ConfigError("degradation: need 0 <= sigma_min <= sigma_max");
  }
  if (patch_size < 2 || patch_size % 2 != 0) throw ConfigError("patch_size must be even and >= 2");
  rethrow_as_config([&] {
    weights.validate();
    generator.validate();
    if (adversarial()) discriminator.validate();
  });
  if (features.widths.empty()) throw ConfigError("feature_extractor: widths must not be empty");
  for (int w : features.widths)
    if (w <= 0) throw ConfigError("feature_extractor: widths must be positive");
  if (!(batch_norm.eps > 0) || !(batch_norm.momentum >= 0 && batch_norm.momentum <= 1)) {
    throw ConfigError("batch_norm: need eps > 0 and momentum in [0,1]");
  }
}

TrainingBatch sample_batch(const std::vector<ColorImage>& dataset, const TrainConfig& config,
                           std::uint64_t batch_index) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  const std::size_t p = config.patch_size;
  const std::size_t n = static_cast<std::size_t>(config.batch_size);
  std::vector<ColorImage> targets;
  std::vector<PackedInput> inputs;
  TrainingBatch batch;
  targets.reserve(n);
  inputs.reserve(n);
  const DegradationSpec noise{0.0, stream_key(config.seed, kNoiseStream), config.clip};
  for (std::size_t b = 0; b < n; ++b) {
    const std::uint64_t example = batch_index * n + b;
    CounterRng rng(config.seed, example);
    const ColorImage& image = dataset[rng.below(dataset.size())];
    if (image.height() < p || image.width() < p) {
      throw DataError("training image of " + std::to_string(image.height()) + "x" +
                      std::to_string(image.width()) + " is smaller than the " + std::to_string(p) +
                      "-pixel patch");
    }
    const std::size_t y0 = rng.below(image.height() - p + 1);
    const std::size_t x0 = rng.below(image.width() - p + 1);
    ColorImage patch(p, p);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) patch.at(c, y, x) = image.at(c, y0 + y, x0 + x);
    if (config.augment) {
      const Dihedral op = kDihedralGroup[rng.below(kDihedralGroup.size())];
      static_cast<PlanarImage&>(patch) = apply_dihedral(patch, op);
    }
    DegradationSpec spec = noise;
    spec.sigma = rng.uniform(config.sigma_min, config.sigma_max);
    batch.sigmas.push_back(spec.sigma);
    inputs.push_back(degrade_and_pack(patch, config.pattern, spec, example));
    targets.push_back(std::move(patch));
  }
  batch.inputs = stack_images(std::span<const PackedInput>(inputs));
  batch.targets = stack_images(std::span<const ColorImage>(targets));
  batch.dropout_key = stream_key(config.seed ^ kDropoutStream, batch_index);
  return batch;
}

double train_step_discriminator(const TrainingBatch& batch, const Generator& generator,
                                Discriminator& discriminator, Adam& optimizer) {
  Tensor fake;
  {
    NoGradGuard no_grad;
    CounterRng rng(batch.dropout_key);
    fake = generator_forward(generator, batch.inputs, {Mode::Train, &rng});
  }
  const Tensor real_scores = discriminator_forward(discriminator, batch.targets, Mode::Train);
  const Tensor fake_scores = discriminator_forward(discriminator, fake, Mode::Train);
  const Tensor loss = discriminator_loss(real_scores, fake_scores);
  const double value = loss.item();
  require_finite_loss(value, "discriminator loss");
  discriminator.params.zero_grad();
  backward(loss);
  optimizer.step();
  return value;
}

GeneratorLosses train_step_generator(const TrainingBatch& batch, Generator& generator,
                                     Discriminator* discriminator, const FeatureExtractor& fx,
                                     const LossWeights& weights, Adam& optimizer) {
  if (weights.lambda_a > 0 && !discriminator) {
    throw std::invalid_argument("train_step_generator: lambda_a > 0 needs a discriminator");
  }
  CounterRng rng(batch.dropout_key);
  const Tensor output = generator_forward(generator, batch.inputs, {Mode::Train, &rng});
  // Backward closures test requires_grad when they run, so the freeze has to
  // outlive the backward pass.
  FreezeGuard freeze(weights.lambda_a > 0 ? &discriminator->params : nullptr);
  Tensor fake_scores;
  if (weights.lambda_a > 0) {
    fake_scores = discriminator_forward(*discriminator, output, Mode::Train, false);
  }
  const LossTerms terms = total_loss(output, batch.targets, fake_scores, weights, fx);
  GeneratorLosses losses;
  losses.total = terms.total.item();
  losses.mse = terms.mse.item();
  if (terms.perceptual.defined()) losses.perceptual = terms.perceptual.item();
  if (terms.adversarial.defined()) losses.adversarial = terms.adversarial.item();
  require_finite_loss(losses.total, "generator loss");
  generator.params.zero_grad();
  backward(terms.total);
  optimizer.step();
  return losses;
}

void write_train_log_header(std::ostream& out) { out << "step,d_loss,g_total,g_mse,g_perc,g_adv\n"; }

void write_train_log_row(std::ostream& out, const TrainLogRow& row) {
  out << row.step;
  write_optional(out, row.d_loss);
  write_optional(out, row.g.total);
  write_optional(out, row.g.mse);
  write_optional(out, row.g.perceptual);
  write_optional(out, row.g.adversarial);
  out << '\n';
}

std::string checkpoint_name(std::uint64_t step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_%06" PRIu64 ".bjdd", step);
  return buf;
}

ModelMetadata model_metadata(const TrainConfig& config, std::uint64_t step) {
  ModelMetadata m;
  m.generator = config.generator;
  if (config.adversarial()) m.discriminator = config.discriminator;
  m.batch_norm = config.batch_norm;
  m.pattern = config.pattern;
  m.features = config.features;
  m.train_step = step;
  return m;
}

TrainResult train_loop(const std::vector<ColorImage>& dataset, const TrainConfig& config,
                       const fs::path& out_dir, const TrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw DataError("training dataset is empty");
  for (const auto& image : dataset) {
    if (image.height() < config.patch_size || image.width() < config.patch_size) {
      throw DataError("every training image must be at least " + std::to_string(config.patch_size) +
                      " pixels on each side");
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw DataError("cannot create output directory " + out_dir.string());
  }
  if (!options.overwrite) {
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      const std::string name = entry.path().filename().string();
      if (name == kTrainLogName || (name.rfind("checkpoint_", 0) == 0 && entry.path().extension() == ".bjdd")) {
        throw DataError(out_dir.string() + " already holds training output (" + name + ")");
      }
    }
  }
  const fs::path log_path = out_dir / kTrainLogName;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw DataError("cannot write " + log_path.string());
  write_train_log_header(log);

  TrainResult result{build_generator(config.generator, config.init_seed), std::nullopt, {}, {}};
  if (config.adversarial()) {
    result.discriminator = build_discriminator(config.discriminator, stream_key(config.init_seed, kDiscriminatorInit));
    result.discriminator->bn = config.batch_norm;
  }
  Generator& g = result.generator;
  Discriminator* d = result.discriminator ? &*result.discriminator : nullptr;
  const FeatureExtractor fx(config.features);
  Adam g_opt(g.params, config.adam);
  std::optional<Adam> d_opt;
  if (d) d_opt.emplace(d->params, config.adam);

  auto save = [&](std::uint64_t step) {
    const fs::path path = out_dir / checkpoint_name(step);
    save_model(path, g, d, model_metadata(config, step), options.overwrite);
    result.checkpoints.push_back(path);
  };

  save(0);
  const auto d_steps = static_cast<std::uint64_t>(config.d_steps_per_g);
  for (std::uint64_t step = 1; step <= config.steps; ++step) {
    TrainLogRow row;
    row.step = step;
    try {
      TrainingBatch batch;
      if (d) {
        for (std::uint64_t k = 0; k < d_steps; ++k) {
          batch = sample_batch(dataset, config, (step - 1) * d_steps + k);
          row.d_loss = train_step_discriminator(batch, g, *d, *d_opt);
        }
      } else {
        batch = sample_batch(dataset, config, (step - 1) * d_steps + d_steps - 1);
      }
      row.g = train_step_generator(batch, g, d, fx, config.weights, g_opt);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(step) + ": " + e.what());
    }
    write_train_log_row(log, row);
    log.flush();
    if (!log) throw DataError("write failed for " + log_path.string());
    result.log.push_back(row);
    if (options.on_step) options.on_step(row);
    if (step == config.steps || (config.checkpoint_every > 0 && step % config.checkpoint_every == 0)) {
      save(step);
    }
  }
  return result;
}

}  // namespace bjdd
