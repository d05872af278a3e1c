#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"

namespace nowcast {

// Extents in row-major order. Sequences are [T,C,H,W], images [C,H,W].
// A rank-0 shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Gradient recording is on by default and can be suspended per thread.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard() noexcept;
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;  // null for leaves

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

// One taped operation. `backward` reads the output's gradient and accumulates
// into the inputs that require it.
template <typename T>
struct Node {
  const char* op = "";
  std::vector<ImplPtr<T>> inputs;
  std::function<void(const TensorImpl<T>& out)> backward;
};

}  // namespace detail

// Dense row-major array with optional gradient.
//
// Tensor is a shared handle: copies alias the same storage, the way a
// shared_ptr does. Use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Handle semantics: writing through a const handle is allowed, as with
  // shared_ptr. Do not mutate tensors that sit inside a live graph.
  std::span<T> mutable_data() const { return impl_->data; }
  T item() const;
  T at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  // Only leaves may toggle requires_grad.
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const noexcept { return impl_ && !impl_->grad_fn; }

  bool has_grad() const noexcept { return impl_ && !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() const { return impl_->ensure_grad(); }
  void zero_grad() const;

  // New leaf sharing nothing with this tensor.
  Tensor clone() const;
  // New leaf with a copy of the values and no history.
  Tensor detach() const;

  const detail::ImplPtr<T>& impl() const noexcept { return impl_; }
  static Tensor from_impl(detail::ImplPtr<T> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  detail::ImplPtr<T> impl_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace nowcast
