// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bjdd/errors.hpp"

namespace bjdd {

namespace {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// dst (+)= a * b. Eigen falls back to matrix-vector kernels when the result
// is a single row or column, and those peel by pointer alignment, so the sum
// order would change between runs. Those shapes take a fixed-order loop.
template <typename A, typename B>
void product(const A& a, const B& b, MatMap dst, bool accumulate) {
  if (dst.rows() > 1 && dst.cols() > 1) {
    if (accumulate) {
      dst.noalias() += a * b;
    } else {
      dst.noalias() = a * b;
    }
    return;
  }
  if (!accumulate) dst.setZero();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const Real aik = a(i, k);
      for (Eigen::Index j = 0; j < b.cols(); ++j) dst(i, j) += aik * b(k, j);
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw std::invalid_argument(std::string(op) + ": expected (N,C,H,W), got " +
                                shape_string(x.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel;
  std::size_t out_height, out_width;
  int stride, padding;

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_height * out_width; }
};

// Unfolds one (C,H,W) image into a (C*k*k, Ho*Wo) patch matrix.
void im2col(const Real* img, const ConvGeometry& g, Real* cols) {
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const auto oh = static_cast<std::ptrdiff_t>(g.out_height);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_width);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const Real* plane = img + c * g.height * g.width;
    for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
        for (std::ptrdiff_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = oy * g.stride - g.padding + ky;
          Real* row = cols + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, Real(0));
            continue;
          }
          const Real* src = plane + iy * w;
          for (std::ptrdiff_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = ox * g.stride - g.padding + kx;
            row[ox] = (ix >= 0 && ix < w) ? src[ix] : Real(0);
          }
        }
        cols += oh * ow;
      }
    }
  }
}

// Adjoint of im2col: scatters-adds the patch matrix back onto the image.
void col2im_add(const Real* cols, const ConvGeometry& g, Real* img) {
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const auto oh = static_cast<std::ptrdiff_t>(g.out_height);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_width);
  for (std::size_t c = 0; c < g.channels; ++c) {
    Real* plane = img + c * g.height * g.width;
    for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
        for (std::ptrdiff_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          const Real* row = cols + oy * ow;
          Real* dst = plane + iy * w;
          for (std::ptrdiff_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += row[ox];
          }
        }
        cols += oh * ow;
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank4(input, "conv2d");
  require_rank4(weight, "conv2d weight");
  if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
  const std::size_t n = input.dim(0);
  const std::size_t out_ch = weight.dim(0);
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), 0, 0, stride, padding};
  if (weight.dim(1) != g.channels || weight.dim(3) != g.kernel) {
    throw std::invalid_argument("conv2d: weight " + shape_string(weight.shape()) +
                                " incompatible with input " + shape_string(input.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{out_ch}) {
    throw std::invalid_argument("conv2d: bias must have shape (" + std::to_string(out_ch) + ")");
  }
  const std::size_t padded_h = g.height + 2 * static_cast<std::size_t>(padding);
  const std::size_t padded_w = g.width + 2 * static_cast<std::size_t>(padding);
  if (padded_h < g.kernel || padded_w < g.kernel) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  g.out_height = (padded_h - g.kernel) / static_cast<std::size_t>(stride) + 1;
  g.out_width = (padded_w - g.kernel) / static_cast<std::size_t>(stride) + 1;

  const std::size_t in_plane = g.channels * g.height * g.width;
  const std::size_t out_plane = out_ch * g.col_cols();
  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto cols_n = static_cast<Eigen::Index>(g.col_cols());
  const auto oc = static_cast<Eigen::Index>(out_ch);

  std::vector<Real> out(n * out_plane);
  std::vector<Real> cols(g.col_rows() * g.col_cols());
  ConstMatMap w(weight.data().data(), oc, rows);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.data().data() + s * in_plane, g, cols.data());
    MatMap y(out.data() + s * out_plane, oc, cols_n);
    product(w, ConstMatMap(cols.data(), rows, cols_n), y, false);
    if (bias.defined()) {
      const auto b = bias.data();
      for (Eigen::Index o = 0; o < oc; ++o) y.row(o).array() += b[static_cast<std::size_t>(o)];
    }
  }
  detail::require_finite(out, "conv2d");

  ImplPtr x_impl = input.impl();
  ImplPtr w_impl = weight.impl();
  ImplPtr b_impl = bias.defined() ? bias.impl() : nullptr;
  auto fn = [=](const TensorImpl& o) {
    std::vector<Real> scratch(g.col_rows() * g.col_cols());
    ConstMatMap wm(w_impl->data.data(), oc, rows);
    for (std::size_t s = 0; s < n; ++s) {
      ConstMatMap dy(o.grad.data() + s * out_plane, oc, cols_n);
      if (w_impl->requires_grad) {
        im2col(x_impl->data.data() + s * in_plane, g, scratch.data());
        MatMap dw(w_impl->grad_buffer().data(), oc, rows);
        product(dy, ConstMatMap(scratch.data(), rows, cols_n).transpose(), dw, true);
      }
      if (b_impl && b_impl->requires_grad) {
        auto& db = b_impl->grad_buffer();
        for (Eigen::Index c = 0; c < oc; ++c) {
          Real acc = 0;
          for (Eigen::Index j = 0; j < cols_n; ++j) acc += dy(c, j);
          db[static_cast<std::size_t>(c)] += acc;
        }
      }
      if (x_impl->requires_grad) {
        MatMap dcols(scratch.data(), rows, cols_n);
        product(wm.transpose(), dy, dcols, false);
        col2im_add(scratch.data(), g, x_impl->grad_buffer().data() + s * in_plane);
      }
    }
  };
  return detail::make_result({n, out_ch, g.out_height, g.out_width}, std::move(out),
                             {&input, &weight, &bias}, fn);
}

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0 ? in[i] : Real(0);
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x}, [xi](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xi->data[i] > 0) dx[i] += o.grad[i];
    }
  });
}

Tensor leaky_relu(const Tensor& x, Real alpha) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] >= 0 ? in[i] : alpha * in[i];
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x}, [xi, alpha](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xi->data[i] > 0 ? o.grad[i] : alpha * o.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real(1) / (Real(1) + std::exp(-in[i]));
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x}, [xi](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += o.grad[i] * o.data[i] * (Real(1) - o.data[i]);
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState* state,
                  Mode mode, const BatchNormOptions& options) {
  require_rank4(x, "batch_norm");
  const std::size_t n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch}) {
    throw std::invalid_argument("batch_norm: gamma/beta must have shape (" + std::to_string(ch) + ")");
  }
  if (!(options.eps > 0)) throw std::invalid_argument("batch_norm: eps must be positive");
  if (!(options.momentum > 0 && options.momentum < 1)) {
    throw std::invalid_argument("batch_norm: momentum must lie in (0,1)");
  }
  const std::size_t count = n * plane;
  const auto in = x.data();
  std::vector<Real> mean_c(ch), invstd(ch);

  if (mode == Mode::Train) {
    if (count == 0) throw std::invalid_argument("batch_norm: empty batch");
    for (std::size_t c = 0; c < ch; ++c) {
      double sum = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const Real* p = in.data() + (s * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const Real* p = in.data() + (s * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / static_cast<double>(count);
      mean_c[c] = static_cast<Real>(mu);
      invstd[c] = static_cast<Real>(1.0 / std::sqrt(var + options.eps));
      if (state) {
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        auto rm = state->running_mean.mutable_data();
        auto rv = state->running_var.mutable_data();
        rm[c] = static_cast<Real>((1 - options.momentum) * rm[c] + options.momentum * mu);
        rv[c] = static_cast<Real>((1 - options.momentum) * rv[c] + options.momentum * unbiased);
      }
    }
    if (state) state->tracked.mutable_data()[0] += 1;
  } else {
    if (!state || !state->tracked.defined() || state->tracked.item() <= 0) {
      throw std::logic_error("batch_norm: eval mode with uninitialized running statistics");
    }
    const auto rm = state->running_mean.data();
    const auto rv = state->running_var.data();
    for (std::size_t c = 0; c < ch; ++c) {
      mean_c[c] = rm[c];
      invstd[c] = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(rv[c]) + options.eps));
    }
  }

  std::vector<Real> xhat(x.numel()), out(x.numel());
  const auto g = gamma.data();
  const auto b = beta.data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (s * ch + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const Real v = (in[base + i] - mean_c[c]) * invstd[c];
        xhat[base + i] = v;
        out[base + i] = g[c] * v + b[c];
      }
    }
  }
  detail::require_finite(out, "batch_norm");

  ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  const bool train = mode == Mode::Train;
  auto fn = [=, xhat = std::move(xhat)](const TensorImpl& o) {
    for (std::size_t c = 0; c < ch; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t base = (s * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += o.grad[base + i];
          sum_dy_xhat += static_cast<double>(o.grad[base + i]) * xhat[base + i];
        }
      }
      if (gi->requires_grad) gi->grad_buffer()[c] += static_cast<Real>(sum_dy_xhat);
      if (bi->requires_grad) bi->grad_buffer()[c] += static_cast<Real>(sum_dy);
      if (!xi->requires_grad) continue;
      auto& dx = xi->grad_buffer();
      const Real scale = gi->data[c] * invstd[c];
      const auto m = static_cast<double>(count);
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t base = (s * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (train) {
            dx[base + i] += static_cast<Real>(
                scale * (o.grad[base + i] - sum_dy / m - xhat[base + i] * sum_dy_xhat / m));
          } else {
            dx[base + i] += scale * o.grad[base + i];
          }
        }
      }
    }
  };
  return detail::make_result(x.shape(), std::move(out), {&x, &gamma, &beta}, fn);
}

namespace {

// For every element of the shuffled (N, C, rH, rW) layout, the flat index of
// its source in the (N, C*r*r, H, W) layout.
std::vector<std::size_t> shuffle_index(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                                       std::size_t r) {
  std::vector<std::size_t> idx(n * c * r * r * h * w);
  std::size_t k = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h * r; ++y)
        for (std::size_t x = 0; x < w * r; ++x) {
          const std::size_t src_c = ch * r * r + (y % r) * r + (x % r);
          idx[k++] = ((s * c * r * r + src_c) * h + y / r) * w + x / r;
        }
  return idx;
}

}  // namespace

Tensor pixel_shuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_shuffle");
  if (r <= 0) throw std::invalid_argument("pixel_shuffle: factor must be positive");
  const auto rr = static_cast<std::size_t>(r);
  if (x.dim(1) % (rr * rr) != 0) {
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(x.dim(1)) +
                                " not divisible by r^2");
  }
  const std::size_t n = x.dim(0), c = x.dim(1) / (rr * rr), h = x.dim(2), w = x.dim(3);
  auto idx = shuffle_index(n, c, h, w, rr);
  std::vector<Real> out(idx.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = in[idx[i]];
  ImplPtr xi = x.impl();
  return detail::make_result({n, c, h * rr, w * rr}, std::move(out), {&x},
                             [xi, idx = std::move(idx)](const TensorImpl& o) {
                               auto& dx = xi->grad_buffer();
                               for (std::size_t i = 0; i < idx.size(); ++i) dx[idx[i]] += o.grad[i];
                             });
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_unshuffle");
  if (r <= 0) throw std::invalid_argument("pixel_unshuffle: factor must be positive");
  const auto rr = static_cast<std::size_t>(r);
  if (x.dim(2) % rr != 0 || x.dim(3) % rr != 0) {
    throw std::invalid_argument("pixel_unshuffle: spatial size not divisible by factor");
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2) / rr, w = x.dim(3) / rr;
  auto idx = shuffle_index(n, c, h, w, rr);
  std::vector<Real> out(idx.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = in[i];
  ImplPtr xi = x.impl();
  return detail::make_result({n, c * rr * rr, h, w}, std::move(out), {&x},
                             [xi, idx = std::move(idx)](const TensorImpl& o) {
                               auto& dx = xi->grad_buffer();
                               for (std::size_t i = 0; i < idx.size(); ++i) dx[i] += o.grad[idx[i]];
                             });
}

Tensor dropout(const Tensor& x, Real keep_prob, Mode mode, CounterRng* rng) {
  if (!(keep_prob > 0 && keep_prob <= 1)) {
    throw std::invalid_argument("dropout: keep_prob must lie in (0,1]");
  }
  if (mode == Mode::Eval || keep_prob == 1) return x;
  if (!rng) throw std::invalid_argument("dropout: train mode requires an rng");
  const Real scale = Real(1) / keep_prob;
  std::vector<Real> mask(x.numel());
  for (auto& m : mask) m = rng->uniform() < keep_prob ? scale : Real(0);
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x},
                             [xi, mask = std::move(mask)](const TensorImpl& o) {
                               auto& dx = xi->grad_buffer();
                               for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += o.grad[i] * mask[i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  detail::require_finite(out, "add");
  ImplPtr ai = a.impl(), bi = b.impl();
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [ai, bi](const TensorImpl& o) {
    for (const auto& in : {ai, bi}) {
      if (!in->requires_grad) continue;
      auto& d = in->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  detail::require_finite(out, "sub");
  ImplPtr ai = a.impl(), bi = b.impl();
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [ai, bi](const TensorImpl& o) {
    if (ai->requires_grad) {
      auto& d = ai->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto& d = bi->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= o.grad[i];
    }
  });
}

Tensor affine(const Tensor& x, Real scale, Real shift) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * in[i] + shift;
  detail::require_finite(out, "affine");
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x}, [xi, scale](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += scale * o.grad[i];
  });
}

Tensor mean_square(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_square");
  const std::size_t count = a.numel();
  if (count == 0) throw std::invalid_argument("mean_square: empty tensors");
  const auto da = a.data(), db = b.data();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    acc += d * d;
  }
  const Real value = static_cast<Real>(acc / static_cast<double>(count));
  detail::require_finite(std::span<const Real>(&value, 1), "mean_square");
  ImplPtr ai = a.impl(), bi = b.impl();
  return detail::make_result(Shape{}, {value}, {&a, &b}, [ai, bi, count](const TensorImpl& o) {
    const Real k = Real(2) * o.grad[0] / static_cast<Real>(count);
    if (ai->requires_grad) {
      auto& d = ai->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) d[i] += k * (ai->data[i] - bi->data[i]);
    }
    if (bi->requires_grad) {
      auto& d = bi->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) d[i] -= k * (ai->data[i] - bi->data[i]);
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  const std::size_t count = a.numel();
  const auto da = a.data(), db = b.data();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) acc += static_cast<double>(da[i]) * db[i];
  const Real value = static_cast<Real>(acc);
  detail::require_finite(std::span<const Real>(&value, 1), "dot");
  ImplPtr ai = a.impl(), bi = b.impl();
  return detail::make_result(Shape{}, {value}, {&a, &b}, [ai, bi, count](const TensorImpl& o) {
    const Real g = o.grad[0];
    if (ai->requires_grad) {
      auto& d = ai->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) d[i] += g * bi->data[i];
    }
    if (bi->requires_grad) {
      auto& d = bi->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) d[i] += g * ai->data[i];
    }
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t count = x.numel();
  if (count == 0) throw std::invalid_argument("mean: empty tensor");
  double acc = 0;
  for (Real v : x.data()) acc += v;
  const Real value = static_cast<Real>(acc / static_cast<double>(count));
  detail::require_finite(std::span<const Real>(&value, 1), "mean");
  ImplPtr xi = x.impl();
  return detail::make_result(Shape{}, {value}, {&x}, [xi, count](const TensorImpl& o) {
    const Real k = o.grad[0] / static_cast<Real>(count);
    for (auto& d : xi->grad_buffer()) d += k;
  });
}

Tensor per_sample_mean(const Tensor& x) {
  if (x.rank() < 1 || x.dim(0) == 0) throw std::invalid_argument("per_sample_mean: empty batch");
  const std::size_t n = x.dim(0), per = x.numel() / n;
  std::vector<Real> out(n);
  const auto in = x.data();
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0;
    for (std::size_t i = 0; i < per; ++i) acc += in[s * per + i];
    out[s] = static_cast<Real>(acc / static_cast<double>(per));
  }
  ImplPtr xi = x.impl();
  return detail::make_result({n}, std::move(out), {&x}, [xi, n, per](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t s = 0; s < n; ++s) {
      const Real k = o.grad[s] / static_cast<Real>(per);
      for (std::size_t i = 0; i < per; ++i) dx[s * per + i] += k;
    }
  });
}

Tensor log_clamped(const Tensor& x, Real lo, Real hi) {
  if (!(lo > 0 && lo <= hi)) throw std::invalid_argument("log_clamped: need 0 < lo <= hi");
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::clamp(in[i], lo, hi));
  detail::require_finite(out, "log_clamped");
  ImplPtr xi = x.impl();
  return detail::make_result(x.shape(), std::move(out), {&x}, [xi, lo, hi](const TensorImpl& o) {
    auto& dx = xi->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const Real v = xi->data[i];
      if (v >= lo && v <= hi) dx[i] += o.grad[i] / v;
    }
  });
}

}  // namespace bjdd
