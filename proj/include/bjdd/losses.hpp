// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Training objectives. The generator minimizes
///
///   L = L_mse + lambda_p * L_perceptual + lambda_a * L_adversarial
///
/// and the discriminator minimizes the binary cross-entropy of separating
/// real images (score -> 1) from generated ones (score -> 0).
///
/// The perceptual term uses a fixed, randomly initialized conv stack
/// (FeatureExtractor) in place of pre-trained VGG19 features. Any extractor
/// mapping (N,3,H,W) to a feature tensor can be substituted through the
/// same interface.

#pragma once

#include <cstdint>
#include <vector>

#include "bjdd/models.hpp"
#include "bjdd/tensor.hpp"

namespace bjdd {

inline constexpr Real kScoreEpsilon = Real(1e-7);

struct LossWeights {
  double lambda_p = 1.0;
  double lambda_a = 0.001;

  void validate() const;
};

struct FeatureExtractorSpec {
  std::vector<int> widths = {32, 64, 128, 128};
  std::uint64_t seed = 0x5EEDF00DULL;

  bool operator==(const FeatureExtractorSpec&) const = default;
};

/// Non-trainable stack of [conv3x3, ReLU] blocks; block 1 has stride 1 and
/// every later block stride 2. Features are tapped after the last block.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureExtractorSpec spec = {});

  const FeatureExtractorSpec& spec() const noexcept { return spec_; }
  Tensor features(const Tensor& images) const;

 private:
  FeatureExtractorSpec spec_;
  ParameterStore weights_;
};

/// Mean of squared differences over N*3*H*W elements.
Tensor mse_loss(const Tensor& output, const Tensor& target);

/// Squared feature distance summed over channels and averaged over feature
/// map positions (and the batch). The target branch is detached.
Tensor perceptual_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx);

/// -(1/N) sum log D(G(x)). Log arguments are clamped to [eps, 1] so the
/// loss stays finite for scores of exactly 0 or 1.
Tensor adversarial_loss(const Tensor& fake_scores);

/// -(1/N) sum [log D(real) + log(1 - D(fake))], log arguments clamped as above.
Tensor discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores);

struct LossTerms {
  Tensor total;
  Tensor mse;
  Tensor perceptual;   // undefined when lambda_p == 0
  Tensor adversarial;  // undefined when lambda_a == 0
};

/// Composite generator objective. Terms whose weight is zero are neither
/// evaluated nor added, so with both weights zero `total` is `mse` itself and
/// `fake_scores` may be undefined.
LossTerms total_loss(const Tensor& output, const Tensor& target, const Tensor& fake_scores,
                     const LossWeights& weights, const FeatureExtractor& fx);

}  // namespace bjdd
