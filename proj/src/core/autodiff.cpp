#include "nowcast/autodiff.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "nowcast/detail/graph.hpp"

namespace nowcast {

using detail::accumulate;
using detail::attach;
using detail::make_tensor;
using detail::require_same_shape;

namespace {

// Builds out[i] = f(a[i]) and records grad_a[i] += g[i] * df(a[i], out[i]).
template <typename T, typename F, typename DF>
Tensor<T> unary(const char* op, const Tensor<T>& a, F f, DF df) {
  const auto x = a.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  auto out = make_tensor<T>(a.shape(), std::move(y));
  auto ai = a.impl();
  attach(out, op, {&a}, [ai, df](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(ai->data[i], o.data[i]);
    });
  });
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  auto out = make_tensor<T>(a.shape(), std::move(z));
  auto ai = a.impl();
  auto bi = b.impl();
  attach(out, "add", {&a, &b}, [ai, bi](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
    accumulate(bi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
  });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
  auto out = make_tensor<T>(a.shape(), std::move(z));
  auto ai = a.impl();
  auto bi = b.impl();
  attach(out, "sub", {&a, &b}, [ai, bi](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
    accumulate(bi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    });
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  auto out = make_tensor<T>(a.shape(), std::move(z));
  auto ai = a.impl();
  auto bi = b.impl();
  attach(out, "mul", {&a, &b}, [ai, bi](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
    });
    accumulate(bi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
    });
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      "scale", a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary<T>(
      "sigmoid", a, [](T x) { return T{1} / (T{1} + std::exp(-x)); },
      [](T, T s) { return s * (T{1} - s); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary<T>(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T t) { return T{1} - t * t; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary<T>(
      "relu", a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T e) { return e; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary<T>(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> min2(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("min2", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] <= y[i] ? x[i] : y[i];
  auto out = make_tensor<T>(a.shape(), std::move(z));
  auto ai = a.impl();
  auto bi = b.impl();
  attach(out, "min2", {&a, &b}, [ai, bi](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (ai->data[i] <= bi->data[i]) g[i] += o.grad[i];
      }
    });
    accumulate(bi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(ai->data[i] <= bi->data[i])) g[i] += o.grad[i];
      }
    });
  });
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total{0};
  for (T v : a.data()) total += v;
  auto out = make_tensor<T>(Shape{}, {total});
  auto ai = a.impl();
  attach(out, "sum", {&a}, [ai](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (auto& v : g) v += o.grad[0];
    });
  });
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T total{0};
  for (T v : a.data()) total += v;
  const T n = static_cast<T>(a.numel());
  auto out = make_tensor<T>(Shape{}, {total / n});
  auto ai = a.impl();
  attach(out, "mean", {&a}, [ai, n](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      const T share = o.grad[0] / n;
      for (auto& v : g) v += share;
    });
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto out = make_tensor<T>(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()));
  auto ai = a.impl();
  attach(out, "reshape", {&a}, [ai](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
  });
  return out;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& a, std::size_t start, std::size_t length) {
  if (a.rank() == 0 || length == 0 || start + length > a.dim(0)) {
    throw ShapeError("narrow: rows [" + std::to_string(start) + "," + std::to_string(start + length) +
                     ") out of range for " + shape_str(a.shape()));
  }
  const std::size_t row = a.numel() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = length;
  const auto src = a.data().subspan(start * row, length * row);
  auto out = make_tensor<T>(std::move(shape), std::vector<T>(src.begin(), src.end()));
  auto ai = a.impl();
  const std::size_t offset = start * row;
  attach(out, "narrow", {&a}, [ai, offset](const detail::TensorImpl<T>& o) {
    accumulate(ai, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
    });
  });
  return out;
}

template <typename T>
Tensor<T> select(const Tensor<T>& a, std::size_t index) {
  if (a.rank() < 2) throw ShapeError("select: needs rank >= 2, got " + shape_str(a.shape()));
  Shape inner(a.shape().begin() + 1, a.shape().end());
  return reshape(narrow(a, index, 1), std::move(inner));
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    if (p.rank() == 0 || Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      throw ShapeError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    rows += p.dim(0);
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  auto out = make_tensor<T>(std::move(shape), std::move(data));
  std::vector<detail::ImplPtr<T>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  detail::attach_many(out, "concat", parts, [impls](const detail::TensorImpl<T>& o) {
    std::size_t offset = 0;
    for (const auto& in : impls) {
      const std::size_t n = in->data.size();
      accumulate(in, [&](std::vector<T>& g) {
        for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[offset + i];
      });
      offset += n;
    }
  });
  return out;
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  std::vector<Tensor<T>> rows;
  rows.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != parts[0].shape()) {
      throw ShapeError("stack: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    Shape s{1};
    s.insert(s.end(), p.shape().begin(), p.shape().end());
    rows.push_back(reshape(p, std::move(s)));
  }
  return concat(rows);
}

template <typename T>
void backward(const Tensor<T>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ShapeError("backward: root must be a single element, got " +
                     (root.defined() ? shape_str(root.shape()) : std::string("undefined")));
  }
  if (!root.requires_grad()) throw std::logic_error("backward: root does not require grad");

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::TensorImpl<T>*> order;
  std::unordered_set<detail::TensorImpl<T>*> seen;
  std::vector<std::pair<detail::TensorImpl<T>*, std::size_t>> stack_;
  stack_.emplace_back(root.impl().get(), 0);
  seen.insert(root.impl().get());
  while (!stack_.empty()) {
    auto& [node, next] = stack_.back();
    const auto* fn = node->grad_fn.get();
    if (fn && next < fn->inputs.size()) {
      auto* child = fn->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack_.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack_.pop_back();
  }

  // Intermediate gradients start from zero on every sweep.
  for (auto* t : order) {
    if (t->grad_fn) t->grad.clear();
  }
  root.impl()->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* t = *it;
    if (t->grad_fn && !t->grad.empty()) t->grad_fn->backward(*t);
  }
  for (auto* t : order) {
    if (t->grad_fn) {
      t->grad.clear();
      t->grad.shrink_to_fit();
    }
  }
}

#define NOWCAST_INSTANTIATE(T)                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> scale(const Tensor<T>&, T);                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                \
  template Tensor<T> tanh(const Tensor<T>&);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                   \
  template Tensor<T> exp(const Tensor<T>&);                                    \
  template Tensor<T> abs(const Tensor<T>&);                                    \
  template Tensor<T> min2(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sum(const Tensor<T>&);                                    \
  template Tensor<T> mean(const Tensor<T>&);                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                         \
  template Tensor<T> narrow(const Tensor<T>&, std::size_t, std::size_t);       \
  template Tensor<T> select(const Tensor<T>&, std::size_t);                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                    \
  template Tensor<T> stack(const std::vector<Tensor<T>>&);                     \
  template void backward(const Tensor<T>&);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast
