// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Binary tensor archive used for model checkpoints and packed inputs.
///
/// Layout, all integers unsigned 32-bit little-endian:
///
///   "BJDD" | version | metadata length | metadata (UTF-8 JSON)
///   tensor count | per tensor: name length, name, rank, dims..., float32 LE data

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bjdd/cfa.hpp"
#include "bjdd/errors.hpp"
#include "bjdd/losses.hpp"
#include "bjdd/models.hpp"

namespace bjdd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Kind { BadMagic, Truncated, UnsupportedVersion, Malformed };
  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct ArchivedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  bool operator==(const ArchivedTensor&) const = default;
};

struct Archive {
  /// Stored and returned byte for byte.
  std::string metadata;
  std::vector<ArchivedTensor> tensors;

  bool operator==(const Archive&) const = default;
};

std::vector<std::uint8_t> encode_archive(const Archive& archive);
/// Throws CheckpointError. Nothing is returned unless the whole buffer parses.
Archive decode_archive(const std::vector<std::uint8_t>& bytes);

/// Writes atomically (temporary file, then rename). Refuses to replace an
/// existing file unless `overwrite` is set.
void save_archive(const std::filesystem::path& path, const Archive& archive, bool overwrite = false);
Archive load_archive(const std::filesystem::path& path);

/// Everything needed to rebuild a model from a checkpoint.
struct ModelMetadata {
  GeneratorSpec generator;
  std::optional<DiscriminatorSpec> discriminator;
  BatchNormOptions batch_norm;
  BayerPattern pattern;
  FeatureExtractorSpec features;
  std::uint64_t train_step = 0;
};

struct Model {
  ModelMetadata metadata;
  Generator generator;
  std::optional<Discriminator> discriminator;
};

/// Tensor names are prefixed "generator." and "discriminator.".
Archive model_to_archive(const Generator& generator, const Discriminator* discriminator,
                         const ModelMetadata& metadata);
/// Rebuilds both networks from the stored specs and copies every tensor.
/// Missing, extra or mis-shaped tensors are errors.
Model model_from_archive(const Archive& archive);

void save_model(const std::filesystem::path& path, const Generator& generator,
                const Discriminator* discriminator, const ModelMetadata& metadata,
                bool overwrite = false);
Model load_model(const std::filesystem::path& path);

}  // namespace bjdd
