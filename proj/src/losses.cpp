// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "bjdd/ops.hpp"
#include "bjdd/rng.hpp"

namespace bjdd {

void LossWeights::validate() const {
  if (!(lambda_p >= 0) || !(lambda_a >= 0)) {
    throw std::invalid_argument("LossWeights: lambda_p and lambda_a must be >= 0");
  }
}

FeatureExtractor::FeatureExtractor(FeatureExtractorSpec spec) : spec_(std::move(spec)) {
  if (spec_.widths.empty()) throw std::invalid_argument("FeatureExtractor: no blocks");
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
    const auto out_ch = static_cast<std::size_t>(spec_.widths[i]);
    CounterRng rng(spec_.seed, i);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * 9));
    Tensor w({out_ch, in_ch, 3, 3});
    for (Real& v : w.mutable_data()) v = static_cast<Real>(stddev * rng.normal());
    const std::string prefix = "block" + std::to_string(i + 1);
    weights_.add(prefix + ".weight", std::move(w), ParameterStore::Kind::Buffer);
    weights_.add(prefix + ".bias", Tensor({out_ch}), ParameterStore::Kind::Buffer);
    in_ch = out_ch;
  }
}

Tensor FeatureExtractor::features(const Tensor& images) const {
  Tensor x = images;
  for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i + 1);
    x = relu(conv2d(x, weights_.at(prefix + ".weight"), weights_.at(prefix + ".bias"), i == 0 ? 1 : 2, 1));
  }
  return x;
}

Tensor mse_loss(const Tensor& output, const Tensor& target) { return mean_square(output, target); }

Tensor perceptual_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx) {
  if (output.shape() != target.shape()) {
    throw std::invalid_argument("perceptual_loss: shape mismatch " + shape_string(output.shape()) +
                                " vs " + shape_string(target.shape()));
  }
  const Tensor f_out = fx.features(output);
  Tensor f_target;
  {
    NoGradGuard no_grad;
    f_target = fx.features(target.detach());
  }
  // mean over N*C*H*W, times C: per-position squared norm averaged over N*H*W.
  return affine(mean_square(f_out, f_target), static_cast<Real>(f_out.dim(1)));
}

Tensor adversarial_loss(const Tensor& fake_scores) {
  return affine(mean(log_clamped(fake_scores, kScoreEpsilon, Real(1))), Real(-1));
}

Tensor discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  if (real_scores.numel() != fake_scores.numel()) {
    throw std::invalid_argument("discriminator_loss: real and fake batches differ in size");
  }
  const Tensor real_term = mean(log_clamped(real_scores, kScoreEpsilon, Real(1)));
  const Tensor fake_term =
      mean(log_clamped(affine(fake_scores, Real(-1), Real(1)), kScoreEpsilon, Real(1)));
  return affine(add(real_term, fake_term), Real(-1));
}

LossTerms total_loss(const Tensor& output, const Tensor& target, const Tensor& fake_scores,
                     const LossWeights& weights, const FeatureExtractor& fx) {
  weights.validate();
  LossTerms terms;
  terms.mse = mse_loss(output, target);
  terms.total = terms.mse;
  if (weights.lambda_p > 0) {
    terms.perceptual = perceptual_loss(output, target, fx);
    terms.total = add(terms.total, affine(terms.perceptual, static_cast<Real>(weights.lambda_p)));
  }
  if (weights.lambda_a > 0) {
    if (!fake_scores.defined()) {
      throw std::invalid_argument("total_loss: discriminator scores required when lambda_a > 0");
    }
    terms.adversarial = adversarial_loss(fake_scores);
    terms.total = add(terms.total, affine(terms.adversarial, static_cast<Real>(weights.lambda_a)));
  }
  return terms;
}

}  // namespace bjdd
