#include <string>
#include <vector>

#include "nowcast/detail/graph.hpp"
#include "nowcast/nn/layers.hpp"

namespace nowcast::nn {

using nowcast::detail::accumulate;
using nowcast::detail::attach;
using nowcast::detail::make_tensor;

namespace {

template <typename T>
void require_spatial(const char* op, const Tensor<T>& x) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(std::string(op) + ": input must be [C,H,W] or [N,C,H,W], got " +
                     shape_str(x.shape()));
  }
}

}  // namespace

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& x, std::size_t window) {
  require_spatial("maxpool2d", x);
  const std::size_t r = x.rank();
  const std::size_t h = x.dim(r - 2);
  const std::size_t w = x.dim(r - 1);
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw ShapeError("maxpool2d: extents " + shape_str(x.shape()) + " not divisible by window " +
                     std::to_string(window));
  }
  const std::size_t planes = x.numel() / (h * w);
  const std::size_t oh = h / window;
  const std::size_t ow = w / window;
  Shape shape = x.shape();
  shape[r - 2] = oh;
  shape[r - 1] = ow;

  const auto src = x.data();
  std::vector<T> y(planes * oh * ow);
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = p * h * w + (i * window) * w + j * window;
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t at = p * h * w + (i * window + di) * w + (j * window + dj);
            if (src[at] > src[best]) best = at;
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        y[o] = src[best];
        argmax[o] = best;
      }
    }
  }
  auto out = make_tensor<T>(std::move(shape), std::move(y));
  auto xi = x.impl();
  attach(out, "maxpool2d", {&x}, [xi, argmax](const nowcast::detail::TensorImpl<T>& o) {
    accumulate(xi, [&](std::vector<T>& g) {
      for (std::size_t k = 0; k < argmax.size(); ++k) g[argmax[k]] += o.grad[k];
    });
  });
  return {out, std::move(argmax)};
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor) {
  require_spatial("upsample_nearest", x);
  if (factor == 0) throw ShapeError("upsample_nearest: factor must be positive");
  const std::size_t r = x.rank();
  const std::size_t h = x.dim(r - 2);
  const std::size_t w = x.dim(r - 1);
  const std::size_t planes = x.numel() / (h * w);
  const std::size_t oh = h * factor;
  const std::size_t ow = w * factor;
  Shape shape = x.shape();
  shape[r - 2] = oh;
  shape[r - 1] = ow;

  const auto src = x.data();
  std::vector<T> y(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      const T* row = src.data() + p * h * w + (i / factor) * w;
      T* dst = y.data() + (p * oh + i) * ow;
      for (std::size_t j = 0; j < ow; ++j) dst[j] = row[j / factor];
    }
  }
  auto out = make_tensor<T>(std::move(shape), std::move(y));
  auto xi = x.impl();
  attach(out, "upsample_nearest", {&x}, [xi, planes, h, w, factor](const nowcast::detail::TensorImpl<T>& o) {
    accumulate(xi, [&](std::vector<T>& g) {
      const std::size_t oh = h * factor;
      const std::size_t ow = w * factor;
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < oh; ++i) {
          const T* row = o.grad.data() + (p * oh + i) * ow;
          T* dst = g.data() + p * h * w + (i / factor) * w;
          for (std::size_t j = 0; j < ow; ++j) dst[j / factor] += row[j];
        }
      }
    });
  });
  return out;
}

#define NOWCAST_INSTANTIATE(T)                                          \
  template PoolResult<T> maxpool2d(const Tensor<T>&, std::size_t);      \
  template Tensor<T> upsample_nearest(const Tensor<T>&, std::size_t);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::nn
