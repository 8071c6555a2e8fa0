// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "bjdd/models.hpp"
#include "test_util.hpp"

using namespace bjdd;
using bjdd::testing::random_tensor;

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k = 3) { return in * out * k * k + out; }

// Layer-table oracles, written from the architecture description only.
std::size_t generator_param_oracle(std::size_t blocks, std::size_t w) {
  return conv_params(4, w) + blocks * 2 * conv_params(w, w) + conv_params(w, w) + conv_params(w, 4 * w) +
         conv_params(w, 3);
}

std::size_t discriminator_param_oracle() {
  const std::size_t widths[8] = {64, 64, 128, 128, 256, 256, 512, 512};
  std::size_t total = 0, in = 3;
  for (std::size_t i = 0; i < 8; ++i) {
    total += conv_params(in, widths[i]);
    if (i > 0) total += 2 * widths[i];  // BN gamma and beta
    in = widths[i];
  }
  return total + conv_params(512, 1);
}

void zero_tensor(ParameterStore& p, const std::string& name) {
  for (Real& v : p.at(name).mutable_data()) v = 0;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Discriminator settled_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  Discriminator d = build_discriminator(spec, seed);
  NoGradGuard no_grad;
  discriminator_forward(d, random_tensor({4, 3, 16, 16}, 77, Real(1)), Mode::Train);
  return d;
}

}  // namespace

TEST_CASE("parameter counts match the layer-table oracle") {
  CHECK(generator_param_oracle(16, 64) == 1370435);
  CHECK(discriminator_param_oracle() == 4693697);
  CHECK(count_parameters(build_generator({}, 1).params) == 1370435);
  CHECK(count_parameters(build_discriminator({}, 1).params) == 4693697);
  GeneratorSpec small;
  small.res_blocks = 3;
  small.trunk_width = 8;
  CHECK(count_parameters(build_generator(small, 1).params) == generator_param_oracle(3, 8));
}

TEST_CASE("count_parameters basics") {
  ParameterStore store;
  CHECK(count_parameters(store) == 0);
  store.add("conv.weight", Tensor({64, 4, 3, 3}));
  store.add("conv.bias", Tensor({64}));
  CHECK(count_parameters(store) == 2368);
  store.add("bn.running_mean", Tensor({64}), ParameterStore::Kind::Buffer);
  CHECK(count_parameters(store) == 2368);
  CHECK_THROWS_AS(store.add("conv.bias", Tensor({1})), std::invalid_argument);
}

TEST_CASE("builds are deterministic in the seed") {
  GeneratorSpec spec;
  spec.res_blocks = 2;
  spec.trunk_width = 8;
  const Generator a = build_generator(spec, 5), b = build_generator(spec, 5), c = build_generator(spec, 6);
  REQUIRE(a.params.size() == b.params.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params.entries()[i].name == b.params.entries()[i].name);
    CHECK(same_values(a.params.entries()[i].tensor, b.params.entries()[i].tensor));
    any_diff |= !same_values(a.params.entries()[i].tensor, c.params.entries()[i].tensor);
  }
  CHECK(any_diff);
}

TEST_CASE("He fan-in initialization statistics and zero biases") {
  const Generator g = build_generator({}, 3);
  const Tensor& w = g.params.at("res0.conv1.weight");
  double sum_sq = 0;
  for (Real v : w.data()) sum_sq += static_cast<double>(v) * v;
  const double expected = 2.0 / (64.0 * 9.0);
  CHECK(std::abs(sum_sq / static_cast<double>(w.numel()) - expected) / expected < 0.05);
  for (Real v : g.params.at("res0.conv1.bias").data()) CHECK(v == 0);
  // Residual branch ends and the output conv start at a tenth of the He scale.
  for (const char* name : {"res3.conv2.weight", "out.weight"}) {
    const Tensor& t = g.params.at(name);
    double sq = 0;
    for (Real v : t.data()) sq += static_cast<double>(v) * v;
    const double want = 0.01 * 2.0 / (64.0 * 9.0);
    CHECK(std::abs(sq / static_cast<double>(t.numel()) - want) / want < 0.1);
  }
}

TEST_CASE("default generator output starts at the scale of its input") {
  const Generator g = build_generator({}, 1);
  NoGradGuard no_grad;
  const Tensor y = generator_forward(g, random_tensor({1, 4, 20, 20}, 2, Real(1)));
  double sq = 0;
  for (Real v : y.data()) sq += static_cast<double>(v) * v;
  const double rms = std::sqrt(sq / static_cast<double>(y.numel()));
  MESSAGE("output rms " << rms);
  CHECK(rms < 2.0);
}

TEST_CASE("generator shape contract") {
  GeneratorSpec small;
  small.res_blocks = 2;
  small.trunk_width = 8;
  const Generator g = build_generator(small, 1);
  CHECK(generator_forward(g, Tensor({1, 4, 8, 8})).shape() == Shape{1, 3, 16, 16});
  CHECK(generator_forward(g, Tensor({2, 4, 5, 7})).shape() == Shape{2, 3, 10, 14});
  small.res_blocks = 0;
  CHECK(generator_forward(build_generator(small, 1), Tensor({1, 4, 6, 6})).shape() == Shape{1, 3, 12, 12});
  CHECK_THROWS_AS(generator_forward(g, Tensor({1, 3, 8, 8})), std::invalid_argument);
}

TEST_CASE("default generator maps (N,4,50,50) to (N,3,100,100)") {
  const Generator g = build_generator({}, 1);
  NoGradGuard no_grad;
  CHECK(generator_forward(g, random_tensor({2, 4, 50, 50}, 1, Real(0.5))).shape() == Shape{2, 3, 100, 100});
}

TEST_CASE("spec validation") {
  GeneratorSpec g;
  g.kernel = 4;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = {};
  g.upscale = 3;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = {};
  g.dropout_keep = 0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  DiscriminatorSpec d;
  d.strides = {1, 2};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  CHECK(DiscriminatorSpec{}.widths() == std::vector<int>{64, 64, 128, 128, 256, 256, 512, 512});
}

TEST_CASE("zero input with a zeroed final conv gives zero output") {
  GeneratorSpec small;
  small.res_blocks = 1;
  small.trunk_width = 8;
  Generator g = build_generator(small, 2);
  zero_tensor(g.params, "out.weight");
  const Tensor y = generator_forward(g, Tensor({1, 4, 4, 4}));
  for (Real v : y.data()) CHECK(v == 0);
}

TEST_CASE("a ResBlock with zeroed second conv is the identity") {
  GeneratorSpec spec;
  spec.res_blocks = 3;
  spec.trunk_width = 8;
  Generator g = build_generator(spec, 4);
  for (int b = 0; b < 3; ++b) {
    zero_tensor(g.params, "res" + std::to_string(b) + ".conv2.weight");
    zero_tensor(g.params, "res" + std::to_string(b) + ".conv2.bias");
  }
  // The same network without blocks, sharing every other tensor.
  GeneratorSpec bare = spec;
  bare.res_blocks = 0;
  Generator h = build_generator(bare, 99);
  for (auto& e : h.params.entries()) e.tensor = g.params.at(e.name);
  const Tensor x = random_tensor({2, 4, 6, 6}, 8, Real(1));
  CHECK(same_values(generator_forward(g, x), generator_forward(h, x)));
}

TEST_CASE("global skip: zero blocks and tail reduce the trunk to the head features") {
  GeneratorSpec spec;
  spec.res_blocks = 2;
  spec.trunk_width = 8;
  Generator g = build_generator(spec, 6);
  for (auto& e : g.params.entries()) {
    if (e.name.rfind("res", 0) == 0 || e.name.rfind("tail", 0) == 0) zero_tensor(g.params, e.name);
  }
  const Tensor x = random_tensor({1, 4, 5, 5}, 9, Real(1));
  const Tensor head = relu(conv2d(x, g.params.at("head.weight"), g.params.at("head.bias"), 1, 1));
  CHECK(same_values(generator_trunk(g, x), head));
}

TEST_CASE("discriminator spatial sizes from a 100-pixel input") {
  CHECK(discriminator_feature_sizes({}, 100) == std::vector<std::size_t>{100, 50, 50, 25, 25, 13, 13, 7});
}

TEST_CASE("default discriminator scores (N,3,100,100) strictly inside (0,1)") {
  Discriminator d = build_discriminator({}, 1);
  NoGradGuard no_grad;
  const Tensor s = discriminator_forward(d, random_tensor({2, 3, 100, 100}, 3, Real(1)), Mode::Train);
  REQUIRE(s.shape() == Shape{2});
  for (Real v : s.data()) CHECK((v > 0 && v < 1));
}

TEST_CASE("discriminator eval mode is pure and row-independent") {
  DiscriminatorSpec spec;
  spec.base_width = 8;
  spec.max_width = 64;
  Discriminator d = settled_discriminator(spec, 2);
  const Tensor one = random_tensor({1, 3, 16, 16}, 4, Real(1));
  std::vector<Real> twice(one.data().begin(), one.data().end());
  twice.insert(twice.end(), one.data().begin(), one.data().end());
  const Tensor s = discriminator_forward(d, Tensor({2, 3, 16, 16}, twice), Mode::Eval);
  CHECK(s.data()[0] == s.data()[1]);
  CHECK(s.data()[0] == discriminator_forward(d, one, Mode::Eval).item());
  // Eval before any train-mode batch has no statistics to use.
  Discriminator fresh = build_discriminator(spec, 2);
  CHECK_THROWS_AS(discriminator_forward(fresh, one, Mode::Eval), std::logic_error);
}

TEST_CASE("gradient reaches the discriminator input") {
  DiscriminatorSpec spec;
  spec.base_width = 8;
  spec.max_width = 64;
  Discriminator d = build_discriminator(spec, 3);
  const Tensor x = random_tensor({2, 3, 16, 16}, 5, Real(1), true);
  backward(mean(discriminator_forward(d, x, Mode::Train)));
  double norm = 0;
  for (Real g : x.grad()) norm += std::abs(g);
  CHECK(norm > 0);
}

TEST_CASE("train mode without tracking leaves running statistics untouched") {
  DiscriminatorSpec spec;
  spec.base_width = 8;
  spec.max_width = 64;
  Discriminator d = build_discriminator(spec, 3);
  const std::vector<Real> before(d.params.at("bn2.running_mean").data().begin(),
                                 d.params.at("bn2.running_mean").data().end());
  NoGradGuard no_grad;
  discriminator_forward(d, random_tensor({2, 3, 16, 16}, 5, Real(1)), Mode::Train, false);
  CHECK(std::vector<Real>(d.params.at("bn2.running_mean").data().begin(),
                          d.params.at("bn2.running_mean").data().end()) == before);
  discriminator_forward(d, random_tensor({2, 3, 16, 16}, 5, Real(1)), Mode::Train, true);
  CHECK_FALSE(std::vector<Real>(d.params.at("bn2.running_mean").data().begin(),
                                d.params.at("bn2.running_mean").data().end()) == before);
}
