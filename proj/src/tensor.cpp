// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "bjdd/errors.hpp"

namespace bjdd {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::vector<Real>& detail::TensorImpl::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
  return grad;
}

Tensor::Tensor(Shape shape, Real fill, bool requires_grad)
    : Tensor(shape, std::vector<Real>(shape_numel(shape), fill), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<Real> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape) + " does not match " +
                                std::to_string(data.size()) + " values");
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  set_requires_grad(requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<Real>{value}, requires_grad);
}

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

static const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw std::logic_error("use of undefined Tensor");
  return *impl;
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw std::out_of_range("Tensor::dim: axis out of range");
  return s[axis];
}

std::span<const Real> Tensor::data() const { return checked(impl_).data; }

std::span<Real> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

Real Tensor::item() const {
  if (numel() != 1) throw std::logic_error("Tensor::item on tensor of shape " + shape_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked(impl_);
  impl_->requires_grad = on;
  if (on && !impl_->grad_fn) impl_->grad_buffer();
}

bool Tensor::has_grad() const { return checked(impl_).grad.size() == impl_->data.size(); }

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor has no gradient buffer");
  return impl_->grad;
}

std::span<Real> Tensor::mutable_grad() {
  checked(impl_);
  return impl_->grad_buffer();
}

void Tensor::zero_grad() {
  checked(impl_);
  impl_->grad.assign(impl_->data.size(), Real(0));
}

bool Tensor::has_grad_fn() const { return checked(impl_).grad_fn != nullptr; }

Tensor Tensor::detach() const {
  const auto& self = checked(impl_);
  return Tensor(self.shape, self.data, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() noexcept { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<Real> data,
                   std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor* in : inputs) {
      if (in && in->defined() && in->requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    auto node = std::make_unique<GradNode>();
    for (const Tensor* in : inputs) {
      if (in && in->defined() && in->requires_grad()) node->inputs.push_back(in->impl());
    }
    node->backward = std::move(fn);
    impl->grad_fn = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor::from_impl(std::move(impl));
}

void require_finite(std::span<const Real> values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalError(std::string(op) + ": non-finite value at element " + std::to_string(i));
    }
  }
}

}  // namespace detail

void backward(const Tensor& loss) {
  const auto& root = loss.impl();
  if (!root) throw std::logic_error("backward: undefined tensor");
  if (root->data.size() != 1) {
    throw std::logic_error("backward: loss must be a scalar, got shape " + shape_string(root->shape));
  }
  if (root->consumed) throw std::logic_error("backward: graph already consumed");
  if (!root->requires_grad) throw std::logic_error("backward: loss does not require grad");

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  // `order` owns its nodes: releasing a grad_fn below may drop the last
  // other reference to an interior tensor that is still pending.
  std::vector<std::shared_ptr<detail::TensorImpl>> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<std::shared_ptr<detail::TensorImpl>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) throw std::logic_error("backward: graph already consumed");
    if (node->grad_fn && next < node->grad_fn->inputs.size()) {
      auto child = node->grad_fn->inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    order.push_back(std::move(node));
    stack.pop_back();
  }

  root->grad_buffer().assign(1, Real(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = it->get();
    if (!node->grad_fn) continue;
    node->grad_buffer();
    node->grad_fn->backward(*node);
    node->grad_fn.reset();
    node->consumed = true;
    // Interior gradients are not needed once propagated.
    std::vector<Real>().swap(node->grad);
  }
}

}  // namespace bjdd
