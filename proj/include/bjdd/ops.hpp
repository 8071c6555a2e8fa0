// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Differentiable operations on NCHW tensors.

#pragma once

#include "bjdd/rng.hpp"
#include "bjdd/tensor.hpp"

namespace bjdd {

enum class Mode { Train, Eval };

/// 2-D cross-correlation (no kernel flip).
/// input (N,C,H,W), weight (O,C,k,k), bias (O) or undefined.
/// Output spatial size is floor((H + 2*padding - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 0);

/// Subgradient at 0 is 0.
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Real alpha);
Tensor sigmoid(const Tensor& x);

struct BatchNormOptions {
  Real eps = Real(1e-5);
  Real momentum = Real(0.1);
};

/// Running statistics owned by a parameter store. `tracked` is a one-element
/// tensor counting train-mode updates; eval mode requires it to be positive.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  Tensor tracked;
};

/// Per-channel batch normalization over (N,H,W).
///
/// Train mode normalizes with the (biased) batch statistics; when `state` is
/// non-null the running statistics are updated with the unbiased variance.
/// Eval mode uses the running statistics and throws std::logic_error when
/// they have never been updated.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState* state,
                  Mode mode, const BatchNormOptions& options = {});

/// (N, C*r*r, H, W) -> (N, C, r*H, r*W) with
/// out(n, c, r*h+dy, r*w+dx) = in(n, c*r*r + dy*r + dx, h, w).
Tensor pixel_shuffle(const Tensor& x, int r);
/// Exact inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& x, int r);

/// Inverted dropout. Identity (same tensor returned) for keep_prob == 1 or
/// eval mode; otherwise each element survives with probability keep_prob and
/// is scaled by 1/keep_prob. `rng` is required for the stochastic case.
Tensor dropout(const Tensor& x, Real keep_prob, Mode mode, CounterRng* rng);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, Real scale, Real shift = Real(0));

/// Mean over all elements of (a - b)^2, as a scalar.
Tensor mean_square(const Tensor& a, const Tensor& b);
/// Sum over all elements of a * b, as a scalar.
Tensor dot(const Tensor& a, const Tensor& b);
/// Mean over all elements, as a scalar.
Tensor mean(const Tensor& x);
/// (N, ...) -> (N): mean over every axis but the first.
Tensor per_sample_mean(const Tensor& x);
/// log(clamp(x, lo, hi)); gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& x, Real lo, Real hi);

}  // namespace bjdd
