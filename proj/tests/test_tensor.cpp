// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "bjdd/errors.hpp"
#include "bjdd/ops.hpp"
#include "bjdd/tensor.hpp"
#include "test_util.hpp"

using namespace bjdd;
using bjdd::testing::random_tensor;

TEST_CASE("tensor construction enforces shape/data agreement") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<Real>(5)), std::invalid_argument);
  Tensor t({2, 3}, Real(1.5));
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(Tensor::scalar(3).item() == 3);
  CHECK_FALSE(Tensor().defined());
}

TEST_CASE("requires_grad leaves carry a same-shape zero gradient") {
  Tensor t({2, 2}, Real(1), true);
  REQUIRE(t.has_grad());
  CHECK(t.grad().size() == t.numel());
  for (Real g : t.grad()) CHECK(g == 0);
}

TEST_CASE("conv2d identity kernel") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 1, 1}, {1});
  Tensor b({1}, {0});
  Tensor y = conv2d(x, w, b, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(std::vector<Real>(y.data().begin(), y.data().end()) == std::vector<Real>{1, 2, 3, 4});
}

TEST_CASE("conv2d all-ones 3x3 with padding: hand-summed cross-correlation") {
  Tensor x({1, 1, 3, 3}, Real(1));
  Tensor w({1, 1, 3, 3}, Real(1));
  Tensor b({1}, Real(0));
  Tensor y = conv2d(x, w, b, 1, 1);
  // Center sees all 9 ones; a corner sees a 2x2 block; an edge sees 2x3.
  CHECK(y.data()[4] == 9);
  CHECK(y.data()[0] == 4);
  CHECK(y.data()[2] == 4);
  CHECK(y.data()[8] == 4);
  CHECK(y.data()[1] == 6);
}

TEST_CASE("conv2d is cross-correlation, not convolution") {
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w({1, 1, 3, 3}, {1, 0, 0, 0, 0, 0, 0, 0, 0});
  // A flipped kernel would pick the bottom-right value (9).
  CHECK(conv2d(x, w, Tensor(), 1, 0).item() == 1);
}

TEST_CASE("conv2d output shape for the upsampling conv") {
  Tensor x({1, 64, 50, 50}, Real(0.1));
  Tensor w({256, 64, 3, 3}, Real(0.01));
  Tensor y = conv2d(x, w, Tensor({256}), 1, 1);
  CHECK(y.shape() == Shape{1, 256, 50, 50});
}

TEST_CASE("conv2d stride arithmetic and errors") {
  Tensor x({1, 2, 7, 7}, Real(1));
  Tensor w({3, 2, 3, 3}, Real(1));
  CHECK(conv2d(x, w, Tensor({3}), 2, 1).shape() == Shape{1, 3, 4, 4});
  CHECK_THROWS_AS(conv2d(x, w, Tensor({3}), 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, Tensor({3, 3, 3, 3}), Tensor({3}), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, w, Tensor({2}), 1, 1), std::invalid_argument);
}

TEST_CASE("conv2d is linear in its input") {
  const Tensor x = random_tensor({2, 3, 6, 6}, 1);
  const Tensor y = random_tensor({2, 3, 6, 6}, 2);
  const Tensor w = random_tensor({4, 3, 3, 3}, 3);
  const Real alpha = Real(0.7), beta = Real(-1.3);
  const Tensor lhs = conv2d(add(affine(x, alpha), affine(y, beta)), w, Tensor(), 1, 1);
  const Tensor rhs = add(affine(conv2d(x, w, Tensor(), 1, 1), alpha), affine(conv2d(y, w, Tensor(), 1, 1), beta));
  for (std::size_t i = 0; i < lhs.numel(); ++i) CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-4);
}

TEST_CASE("activations") {
  CHECK(leaky_relu(Tensor::scalar(-1), Real(0.2)).item() == doctest::Approx(-0.2));
  CHECK(sigmoid(Tensor::scalar(0)).item() == Real(0.5));
  Tensor r = relu(Tensor({3}, {-3, 0, 2}));
  CHECK(std::vector<Real>(r.data().begin(), r.data().end()) == std::vector<Real>{0, 0, 2});
}

TEST_CASE("relu subgradient at zero is zero") {
  Tensor x({3}, {-1, 0, 1}, true);
  backward(mean(relu(x)));
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[1] == 0);
  CHECK(x.grad()[2] == doctest::Approx(1.0 / 3));
}

TEST_CASE("batch_norm") {
  Tensor gamma({2}, Real(1)), beta({2}, Real(0));

  SUBCASE("already normalized input passes through") {
    // channel values {-1, 1} have mean 0 and (biased) variance 1
    Tensor x({2, 2, 1, 1}, {-1, 1, 1, -1});
    Tensor y = batch_norm(x, gamma, beta, nullptr, Mode::Train);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));
  }
  SUBCASE("constant channel maps to beta") {
    Tensor b2({2}, {0.25f, -0.5f});
    Tensor x({3, 2, 2, 2}, Real(4.0));
    Tensor y = batch_norm(x, gamma, b2, nullptr, Mode::Train);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(y.data()[(s * 2 + 0) * 4 + i] == Real(0.25));
        CHECK(y.data()[(s * 2 + 1) * 4 + i] == Real(-0.5));
      }
  }
  SUBCASE("random input: per-channel output statistics") {
    Tensor x = random_tensor({4, 2, 3, 3}, 7, Real(3));
    Tensor y = batch_norm(x, gamma, beta, nullptr, Mode::Train);
    for (std::size_t c = 0; c < 2; ++c) {
      double sum = 0, sq = 0;
      for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t i = 0; i < 9; ++i) sum += y.data()[(s * 2 + c) * 9 + i];
      const double mu = sum / 36;
      for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t i = 0; i < 9; ++i) {
          const double d = y.data()[(s * 2 + c) * 9 + i] - mu;
          sq += d * d;
        }
      CHECK(std::abs(mu) < 1e-5);
      CHECK(std::abs(sq / 36 - 1.0) < 1e-3);
    }
  }
  SUBCASE("eval mode requires initialized running statistics") {
    BatchNormState state{Tensor({2}, Real(0)), Tensor({2}, Real(1)), Tensor({1}, Real(0))};
    Tensor x = random_tensor({4, 2, 3, 3}, 8);
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, &state, Mode::Eval), std::logic_error);
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, nullptr, Mode::Eval), std::logic_error);
    batch_norm(x, gamma, beta, &state, Mode::Train);
    CHECK(state.tracked.item() == 1);
    CHECK(state.running_mean.data()[0] != 0);
    CHECK_NOTHROW(batch_norm(x, gamma, beta, &state, Mode::Eval));
  }
  SUBCASE("gamma/beta length must match channels") {
    Tensor x({1, 3, 2, 2}, Real(1));
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, nullptr, Mode::Train), std::invalid_argument);
  }
}

TEST_CASE("pixel_shuffle") {
  SUBCASE("definitional 2x2 mapping") {
    Tensor x({1, 4, 1, 1}, {1, 2, 3, 4});
    Tensor y = pixel_shuffle(x, 2);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    CHECK(std::vector<Real>(y.data().begin(), y.data().end()) == std::vector<Real>{1, 2, 3, 4});
  }
  SUBCASE("feature-count shape arithmetic") {
    CHECK(pixel_shuffle(Tensor({1, 256, 50, 50}), 2).shape() == Shape{1, 64, 100, 100});
  }
  SUBCASE("elementwise definition on a random tensor") {
    const Tensor x = random_tensor({2, 8, 3, 4}, 11);
    const Tensor y = pixel_shuffle(x, 2);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t h = 0; h < 3; ++h)
          for (std::size_t w = 0; w < 4; ++w)
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const Real out = y.data()[((n * 2 + c) * 6 + 2 * h + dy) * 8 + 2 * w + dx];
                const Real in = x.data()[((n * 8 + c * 4 + dy * 2 + dx) * 3 + h) * 4 + w];
                CHECK(out == in);
              }
  }
  SUBCASE("round trip is a bitwise identity") {
    const Tensor x = random_tensor({2, 12, 5, 3}, 12);
    const Tensor back = pixel_unshuffle(pixel_shuffle(x, 2), 2);
    CHECK(std::memcmp(back.data().data(), x.data().data(), x.numel() * sizeof(Real)) == 0);
    const Tensor y = random_tensor({1, 3, 6, 9}, 13);
    const Tensor back2 = pixel_shuffle(pixel_unshuffle(y, 3), 3);
    CHECK(std::memcmp(back2.data().data(), y.data().data(), y.numel() * sizeof(Real)) == 0);
  }
  SUBCASE("channels must divide by r^2") {
    CHECK_THROWS_AS(pixel_shuffle(Tensor({1, 6, 2, 2}), 2), std::invalid_argument);
  }
}

TEST_CASE("dropout") {
  const Tensor x = random_tensor({2, 3, 4, 4}, 21);
  CounterRng rng(5, 0);
  SUBCASE("keep_prob 1 and eval mode are the identity") {
    CHECK(dropout(x, 1, Mode::Train, &rng).same_node(x));
    CHECK(dropout(x, Real(0.5), Mode::Eval, nullptr).same_node(x));
  }
  SUBCASE("invalid keep_prob") {
    CHECK_THROWS_AS(dropout(x, 0, Mode::Train, &rng), std::invalid_argument);
    CHECK_THROWS_AS(dropout(x, Real(-0.1), Mode::Train, &rng), std::invalid_argument);
    CHECK_THROWS_AS(dropout(x, Real(0.5), Mode::Train, nullptr), std::invalid_argument);
  }
  SUBCASE("train mode statistics over 1e6 elements") {
    const std::size_t n = 1000000;
    Tensor ones({n}, Real(1));
    Tensor y = dropout(ones, Real(0.5), Mode::Train, &rng);
    std::size_t zeros = 0;
    double sum = 0;
    for (Real v : y.data()) {
      zeros += v == 0;
      sum += v;
    }
    CHECK(std::abs(static_cast<double>(zeros) / n - 0.5) < 0.01);
    CHECK(std::abs(sum / n - 1.0) < 0.01);
  }
}

TEST_CASE("elementwise add and mean_square") {
  Tensor a({2}, {1, 2}), b({2}, {3, 4});
  Tensor s = add(a, b);
  CHECK(s.data()[0] == 4);
  CHECK(s.data()[1] == 6);
  CHECK(mean_square(a, a).item() == 0);
  CHECK(mean_square(Tensor({2}, {0, 0}), Tensor({2}, {1, 1})).item() == 1);
  CHECK_THROWS_AS(add(a, Tensor({3})), std::invalid_argument);
  CHECK_THROWS_AS(mean_square(a, Tensor({1, 2})), std::invalid_argument);
}

TEST_CASE("backward: closed-form chain rule") {
  // loss = (w*x - 0)^2 with w = 2, x = 3, written as a 1x1 convolution
  Tensor w({1, 1, 1, 1}, {2}, true);
  Tensor x({1, 1, 1, 1}, {3});
  backward(mean_square(conv2d(x, w, Tensor(), 1, 0), Tensor({1, 1, 1, 1}, {0})));
  CHECK(w.grad()[0] == doctest::Approx(36));  // 2 * (w*x) * x
}

TEST_CASE("backward accumulates across multiple uses") {
  Tensor x({2}, {1, 3}, true);
  backward(mean(add(x, x)));  // d/dx mean(2x) = 2/2
  CHECK(x.grad()[0] == doctest::Approx(1));
  CHECK(x.grad()[1] == doctest::Approx(1));
}

TEST_CASE("unused parameters keep an all-zero gradient") {
  Tensor used({2}, {1, 2}, true);
  Tensor unused({3}, {1, 2, 3}, true);
  backward(mean(used));
  for (Real g : unused.grad()) CHECK(g == 0);
}

TEST_CASE("backward error contract") {
  Tensor x({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(affine(x, 2)), std::logic_error);  // not scalar
  Tensor loss = mean(x);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), std::logic_error);  // consumed
  CHECK_THROWS_AS(backward(mean(Tensor({2}, {1, 2}))), std::logic_error);  // no grad path
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(mean(x).requires_grad());
  }
  CHECK(mean(x).requires_grad());
}

TEST_CASE("non-finite forward values are an error") {
  Tensor x({1, 1, 1, 1}, {std::numeric_limits<Real>::infinity()});
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 1, 1, 1}, {1}), Tensor(), 1, 0), NumericalError);
  CHECK_THROWS_AS(mean(Tensor({1}, {std::nanf("")})), NumericalError);
}

TEST_CASE("forward is deterministic for a fixed seed") {
  auto run = [] {
    const Tensor x = random_tensor({2, 3, 8, 8}, 99);
    const Tensor w = random_tensor({5, 3, 3, 3}, 98);
    return conv2d(relu(x), w, Tensor({5}), 2, 1);
  };
  const Tensor a = run(), b = run();
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(Real)) == 0);
}

TEST_CASE("conv2d forward and backward do not depend on buffer placement") {
  // Vector-shaped products (one output channel, one output pixel) included.
  const Shape shapes[][2] = {{{2, 5, 3, 3}, {1, 5, 3, 3}}, {{2, 6, 7, 7}, {3, 6, 3, 3}}, {{1, 9, 1, 1}, {4, 9, 3, 3}}};
  for (const auto& sh : shapes) {
    std::vector<Real> first_y, first_gx, first_gw, first_gb;
    for (int shift = 0; shift < 8; ++shift) {
      std::vector<std::vector<Real>> padding;
      for (int i = 0; i < shift; ++i) padding.emplace_back(static_cast<std::size_t>(1 + i * 3));
      const Tensor x = random_tensor(sh[0], 1, Real(1), true);
      const Tensor w = random_tensor(sh[1], 2, Real(1), true);
      const Tensor b = random_tensor({sh[1][0]}, 3, Real(1), true);
      const Tensor y = conv2d(x, w, b, 1, 1);
      backward(dot(y, random_tensor(y.shape(), 4)));
      std::vector<Real> vy(y.data().begin(), y.data().end()), gx(x.grad().begin(), x.grad().end()),
          gw(w.grad().begin(), w.grad().end()), gb(b.grad().begin(), b.grad().end());
      if (shift == 0) {
        first_y = vy, first_gx = gx, first_gw = gw, first_gb = gb;
      } else {
        REQUIRE(std::memcmp(vy.data(), first_y.data(), vy.size() * sizeof(Real)) == 0);
        REQUIRE(std::memcmp(gx.data(), first_gx.data(), gx.size() * sizeof(Real)) == 0);
        REQUIRE(std::memcmp(gw.data(), first_gw.data(), gw.size() * sizeof(Real)) == 0);
        REQUIRE(std::memcmp(gb.data(), first_gb.data(), gb.size() * sizeof(Real)) == 0);
      }
    }
  }
}
