// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Dense float tensor with reverse-mode automatic differentiation.
///
/// A Tensor is a cheap, shared handle onto a node of a dynamically recorded
/// computation graph. Operations on tensors that require gradients record a
/// backward closure on their output; `backward()` walks the recorded graph in
/// reverse topological order exactly once and then releases it.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bjdd {

#ifdef BJDD_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl;

/// Propagates the gradient held by `out` into the inputs it captured.
using BackwardFn = std::function<void(const TensorImpl& out)>;

struct GradNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until needed
  bool requires_grad = false;
  bool consumed = false;  // set once backward has released this node
  std::unique_ptr<GradNode> grad_fn;

  /// Returns the gradient buffer, allocating zeros on first use.
  std::vector<Real>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  /// An undefined tensor; `defined()` is false.
  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return data().size(); }

  std::span<const Real> data() const;
  /// Writable view of the values. Only parameter owners (optimizers,
  /// initializers, checkpoint loaders) write through this.
  std::span<Real> mutable_data();
  Real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  /// True when a gradient buffer exists (always for requires_grad leaves).
  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// True when this tensor is the output of a recorded op.
  bool has_grad_fn() const;

  /// Leaf copy of the values with no graph history and requires_grad off.
  Tensor detach() const;

  /// Shares storage identity: two handles onto the same node.
  bool same_node(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  // Graph plumbing used by op implementations.
  const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }
  static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Computes d(loss)/d(t) for every tensor t with requires_grad that the loss
/// depends on, accumulating (summing) into existing gradient buffers. The
/// recorded graph is released afterwards; a second call on the same graph
/// throws std::logic_error.
void backward(const Tensor& loss);

/// While alive, ops do not record graph history on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

namespace detail {

/// Creates the output of an op. When grad mode is on and any input requires
/// gradients, the output records `fn` and keeps the inputs alive.
Tensor make_result(Shape shape, std::vector<Real> data,
                   std::initializer_list<const Tensor*> inputs, BackwardFn fn);

/// Throws NumericalError naming `op` when `values` contains NaN or Inf.
void require_finite(std::span<const Real> values, const char* op);

}  // namespace detail

}  // namespace bjdd
