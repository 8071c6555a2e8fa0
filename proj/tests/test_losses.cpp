// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "bjdd/losses.hpp"
#include "test_util.hpp"

using namespace bjdd;
using bjdd::testing::random_tensor;

namespace {

const double kLn2 = std::numbers::ln2;

Tensor scores(std::vector<Real> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

FeatureExtractor small_fx() {
  FeatureExtractorSpec spec;
  spec.widths = {4, 8};
  return FeatureExtractor(spec);
}

}  // namespace

TEST_CASE("mse_loss closed forms and naive oracle") {
  const Tensor a = random_tensor({2, 3, 5, 4}, 1, Real(1));
  CHECK(mse_loss(a, a).item() == 0);
  std::vector<Real> shifted(a.data().begin(), a.data().end());
  for (Real& v : shifted) v += Real(0.25);
  CHECK(mse_loss(Tensor(a.shape(), shifted), a).item() == doctest::Approx(0.0625).epsilon(1e-6));
  const Tensor b = random_tensor({2, 3, 5, 4}, 2, Real(1));
  double naive = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    naive += d * d;
  }
  naive /= static_cast<double>(a.numel());
  CHECK(std::abs(mse_loss(a, b).item() - naive) < 1e-6);
  CHECK_THROWS_AS(mse_loss(a, Tensor({2, 3, 5, 5})), std::invalid_argument);
}

TEST_CASE("adversarial_loss closed forms") {
  CHECK(adversarial_loss(scores({1, 1, 1})).item() == 0);
  CHECK(std::abs(adversarial_loss(scores({0.5, 0.5})).item() - kLn2) < 1e-6);
  CHECK(std::abs(adversarial_loss(scores({0.5, 1.0})).item() - 0.5 * kLn2) < 1e-6);
  // Scores of exactly 0 stay finite through the clamp.
  const double at_zero = adversarial_loss(scores({0, 1})).item();
  CHECK(std::isfinite(at_zero));
  CHECK(at_zero > 0);
}

TEST_CASE("discriminator_loss closed forms") {
  CHECK(discriminator_loss(scores({1, 1}), scores({0, 0})).item() == 0);
  CHECK(std::abs(discriminator_loss(scores({0.5, 0.5}), scores({0.5, 0.5})).item() - 2 * kLn2) < 1e-6);
  CHECK(std::abs(discriminator_loss(scores({0.9}), scores({0.1})).item() - (-2.0 * std::log(0.9))) < 1e-6);
  CHECK(std::isfinite(discriminator_loss(scores({0}), scores({1})).item()));
  CHECK_THROWS_AS(discriminator_loss(scores({0.5}), scores({0.5, 0.5})), std::invalid_argument);
}

TEST_CASE("adversarial gradient: d/ds of -mean log s is -1/(N s)") {
  const Tensor s({2}, {Real(0.25), Real(0.8)}, true);
  backward(adversarial_loss(s));
  CHECK(s.grad()[0] == doctest::Approx(-1.0 / (2 * 0.25)).epsilon(1e-5));
  CHECK(s.grad()[1] == doctest::Approx(-1.0 / (2 * 0.8)).epsilon(1e-5));
}

TEST_CASE("feature extractor is fixed, seeded and non-trainable") {
  const FeatureExtractor a = small_fx(), b = small_fx();
  const Tensor x = random_tensor({1, 3, 12, 12}, 3, Real(1));
  const Tensor fa = a.features(x), fb = b.features(x);
  // Block 1 keeps 12x12, block 2 halves it.
  CHECK(fa.shape() == Shape{1, 8, 6, 6});
  CHECK(std::equal(fa.data().begin(), fa.data().end(), fb.data().begin()));
  CHECK_FALSE(fa.requires_grad());
  FeatureExtractorSpec other_seed;
  other_seed.widths = {4, 8};
  other_seed.seed = 1;
  const Tensor fc = FeatureExtractor(other_seed).features(x);
  CHECK_FALSE(std::equal(fa.data().begin(), fa.data().end(), fc.data().begin()));
}

TEST_CASE("perceptual_loss: zero on identical inputs, positive otherwise, oracle from features") {
  const FeatureExtractor fx = small_fx();
  const Tensor x = random_tensor({2, 3, 12, 12}, 4, Real(1));
  const Tensor y = random_tensor({2, 3, 12, 12}, 5, Real(1));
  CHECK(perceptual_loss(x, x, fx).item() == 0);
  const double value = perceptual_loss(x, y, fx).item();
  CHECK(value > 0);
  // Sum of squares over channels, mean over positions and batch.
  const Tensor fx_x = fx.features(x), fx_y = fx.features(y);
  const std::size_t n = fx_x.dim(0), hw = fx_x.dim(2) * fx_x.dim(3);
  double oracle = 0;
  for (std::size_t i = 0; i < fx_x.numel(); ++i) {
    const double d = static_cast<double>(fx_x.data()[i]) - fx_y.data()[i];
    oracle += d * d;
  }
  oracle /= static_cast<double>(n * hw);
  CHECK(value == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("perceptual_loss sees a pixel permutation that keeps per-image statistics") {
  const FeatureExtractor fx = small_fx();
  const Tensor x = random_tensor({1, 3, 12, 12}, 6, Real(1));
  // Reverse each plane: same multiset of values, different structure.
  std::vector<Real> rev(x.numel());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 144; ++i) rev[c * 144 + i] = x.data()[c * 144 + 143 - i];
  const Tensor y({1, 3, 12, 12}, rev);
  CHECK(perceptual_loss(x, y, fx).item() > 0);
}

TEST_CASE("perceptual target branch is detached") {
  const FeatureExtractor fx = small_fx();
  const Tensor out = random_tensor({1, 3, 8, 8}, 7, Real(1), true);
  const Tensor target = random_tensor({1, 3, 8, 8}, 8, Real(1), true);
  backward(perceptual_loss(out, target, fx));
  double out_norm = 0, target_norm = 0;
  for (Real g : out.grad()) out_norm += std::abs(g);
  for (Real g : target.grad()) target_norm += std::abs(g);
  CHECK(out_norm > 0);
  CHECK(target_norm == 0);
}

TEST_CASE("total_loss with zero weights is exactly the mse term") {
  const FeatureExtractor fx = small_fx();
  const Tensor a = random_tensor({2, 3, 8, 8}, 9, Real(1));
  const Tensor b = random_tensor({2, 3, 8, 8}, 10, Real(1));
  const LossTerms t = total_loss(a, b, Tensor(), {0.0, 0.0}, fx);
  CHECK(t.total.same_node(t.mse));
  const Real direct = mse_loss(a, b).item();
  CHECK(std::memcmp(&direct, &t.total.data()[0], sizeof(Real)) == 0);
  CHECK_FALSE(t.perceptual.defined());
  CHECK_FALSE(t.adversarial.defined());
}

TEST_CASE("total_loss equals the separately computed weighted sum") {
  const FeatureExtractor fx = small_fx();
  const Tensor a = random_tensor({2, 3, 8, 8}, 11, Real(1));
  const Tensor b = random_tensor({2, 3, 8, 8}, 12, Real(1));
  const Tensor s = scores({0.3, 0.6});
  const LossWeights w;  // defaults
  CHECK(w.lambda_p == 1.0);
  CHECK(w.lambda_a == 0.001);
  const double expected = mse_loss(a, b).item() + perceptual_loss(a, b, fx).item() +
                          0.001 * adversarial_loss(s).item();
  CHECK(total_loss(a, b, s, w, fx).total.item() == doctest::Approx(expected).epsilon(1e-6));
  // Identical images and unit scores give zero.
  CHECK(total_loss(a, a, scores({1, 1}), w, fx).total.item() == 0);
  CHECK_THROWS_AS(total_loss(a, b, Tensor(), w, fx), std::invalid_argument);
  CHECK_THROWS_AS(total_loss(a, b, s, {-1.0, 0.0}, fx), std::invalid_argument);
}

TEST_CASE("total_loss is affine in each weight") {
  const FeatureExtractor fx = small_fx();
  const Tensor a = random_tensor({1, 3, 8, 8}, 13, Real(1));
  const Tensor b = random_tensor({1, 3, 8, 8}, 14, Real(1));
  const Tensor s = scores({0.4});
  const double delta = 0.5;
  const LossTerms base = total_loss(a, b, s, {1.0, 0.001}, fx);
  const double dp = total_loss(a, b, s, {1.0 + delta, 0.001}, fx).total.item() - base.total.item();
  CHECK(std::abs(dp - delta * base.perceptual.item()) < 1e-6 * std::max(1.0, std::abs(static_cast<double>(base.total.item()))));
  const double da = total_loss(a, b, s, {1.0, 0.001 + delta}, fx).total.item() - base.total.item();
  CHECK(std::abs(da - delta * base.adversarial.item()) < 1e-6 * std::max(1.0, std::abs(static_cast<double>(base.total.item()))));
}

TEST_CASE("losses are non-negative on random inputs") {
  const FeatureExtractor fx = small_fx();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor a = random_tensor({1, 3, 8, 8}, seed, Real(1));
    const Tensor b = random_tensor({1, 3, 8, 8}, seed + 100, Real(1));
    CHECK(mse_loss(a, b).item() >= 0);
    CHECK(perceptual_loss(a, b, fx).item() >= 0);
    const Tensor s = scores({static_cast<Real>(0.1 + 0.15 * seed)});
    CHECK(adversarial_loss(s).item() >= 0);
    CHECK(discriminator_loss(s, s).item() >= 0);
  }
}
