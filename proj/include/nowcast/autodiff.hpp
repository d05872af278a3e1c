#pragma once

// Differentiable primitives over Tensor and the reverse-mode driver.
//
// Binary elementwise ops require identical shapes; there is no broadcasting
// apart from the scalar factor of scale().

#include <cstddef>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);
// Subgradient 0 at exactly 0.
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
// Subgradient 0 at exactly 0.
template <typename T> Tensor<T> abs(const Tensor<T>& a);
// Elementwise minimum. On ties the value and the gradient go to `a`.
template <typename T> Tensor<T> min2(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

// Same data, new extents.
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
// Rows [start, start+length) along axis 0.
template <typename T> Tensor<T> narrow(const Tensor<T>& a, std::size_t start, std::size_t length);
// Element `index` along axis 0; drops that axis.
template <typename T> Tensor<T> select(const Tensor<T>& a, std::size_t index);
// Joins along axis 0. Trailing extents must agree.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts);
// Stacks equally shaped tensors along a new leading axis.
template <typename T> Tensor<T> stack(const std::vector<Tensor<T>>& parts);

// Reverse-mode sweep from a single-element root. Populates grad on every
// requires_grad leaf reachable from root; repeated calls accumulate.
template <typename T> void backward(const Tensor<T>& root);

}  // namespace nowcast
