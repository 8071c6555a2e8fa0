// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Generator and discriminator networks for joint demosaicing and denoising.
///
/// Generator (packed 4-channel input at half resolution, RGB output):
///
///   head     conv3x3(4 -> W) + ReLU
///   body     B x ResBlock[conv3x3(W -> W) + ReLU, dropout, conv3x3(W -> W), + input]
///   tail     conv3x3(W -> W), + head output (global skip)
///   upsample conv3x3(W -> 4W), pixel_shuffle(2)
///   out      conv3x3(W -> 3), no activation
///
/// Discriminator: 8 x [conv3x3, BN (not on the first layer), LeakyReLU(0.2)]
/// with widths 64,64,128,128,256,256,512,512 and strides 1,2,1,2,..., then
/// conv3x3(-> 1), sigmoid, and the spatial mean as the per-sample score.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bjdd/ops.hpp"
#include "bjdd/tensor.hpp"

namespace bjdd {

/// Named tensors in insertion order. Buffers (BN running statistics) are
/// stored alongside trainable parameters but excluded from optimization and
/// parameter counts.
class ParameterStore {
 public:
  enum class Kind { Parameter, Buffer };

  struct Entry {
    std::string name;
    Tensor tensor;
    Kind kind;
  };

  /// Throws std::invalid_argument on a duplicate name.
  Tensor& add(std::string name, Tensor tensor, Kind kind = Kind::Parameter);

  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

/// Total element count of trainable parameters.
std::size_t count_parameters(const ParameterStore& store);

struct GeneratorSpec {
  int res_blocks = 16;
  int trunk_width = 64;
  int upscale = 2;
  int kernel = 3;
  double dropout_keep = 1.0;

  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int conv_layers = 8;
  int base_width = 64;
  int max_width = 512;
  double lrelu_alpha = 0.2;
  std::vector<int> strides = {1, 2, 1, 2, 1, 2, 1, 2};
  bool first_layer_bn = false;

  /// Width doubles every two layers from base_width, capped at max_width.
  std::vector<int> widths() const;
  void validate() const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Needed only for train-mode dropout with keep < 1.
  CounterRng* rng = nullptr;
};

struct Generator {
  GeneratorSpec spec;
  ParameterStore params;
};

struct Discriminator {
  DiscriminatorSpec spec;
  ParameterStore params;
  BatchNormOptions bn;
};

/// Weights He-normal (fan-in) from `init_seed`, biases zero. The second conv
/// of every ResBlock and the output conv are scaled by 0.1.
Generator build_generator(const GeneratorSpec& spec, std::uint64_t init_seed);

/// Features entering the upsampling conv: tail output plus the head output.
Tensor generator_trunk(const Generator& g, const Tensor& input, const ForwardOptions& options = {});

/// (N,4,H,W) -> (N,3,2H,2W). Output is unbounded; clip at evaluation time.
Tensor generator_forward(const Generator& g, const Tensor& input, const ForwardOptions& options = {});

/// Weights He-normal (fan-in), biases zero, BN gamma 1 / beta 0.
Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t init_seed);

/// (N,3,H,W) -> (N) scores strictly in (0,1). In train mode batch statistics
/// are used; running statistics are updated only when `track_running_stats`.
Tensor discriminator_forward(Discriminator& d, const Tensor& images, Mode mode,
                             bool track_running_stats = true);

/// Spatial extent after each discriminator conv layer, for an input side.
std::vector<std::size_t> discriminator_feature_sizes(const DiscriminatorSpec& spec, std::size_t side);

}  // namespace bjdd
