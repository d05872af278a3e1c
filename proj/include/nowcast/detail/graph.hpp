#pragma once

// Helpers shared by the operation implementations for wiring results into
// the tape. Not part of the public API.

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::detail {

template <typename T>
Tensor<T> make_tensor(Shape shape, std::vector<T> data) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor<T>::from_impl(std::move(impl));
}

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Records `out` on the tape when gradients are enabled and some input needs
// one. `fn` receives the output impl; it should only touch inputs whose
// requires_grad flag is set (see accumulate()).
template <typename T, typename Fn>
void attach(Tensor<T>& out, const char* op, std::initializer_list<const Tensor<T>*> inputs,
            Fn&& fn) {
  if (!grad_enabled() || !any_requires_grad(inputs)) return;
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) node->inputs.push_back(t->impl());
  }
  node->backward = std::forward<Fn>(fn);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
}

// Variant for a dynamic list of inputs (concat, stack).
template <typename T, typename Fn>
void attach_many(Tensor<T>& out, const char* op, const std::vector<Tensor<T>>& inputs, Fn&& fn) {
  if (!grad_enabled()) return;
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  for (const auto& t : inputs) {
    if (t.requires_grad()) node->inputs.push_back(t.impl());
  }
  if (node->inputs.empty()) return;
  node->backward = std::forward<Fn>(fn);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
}

// Calls fn(grad_vector) if `in` participates in differentiation.
template <typename T, typename Fn>
void accumulate(const ImplPtr<T>& in, Fn&& fn) {
  if (in && in->requires_grad) fn(in->ensure_grad());
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace nowcast::detail
