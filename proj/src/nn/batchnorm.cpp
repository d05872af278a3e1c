#include <cmath>
#include <string>
#include <vector>

#include "nowcast/detail/graph.hpp"
#include "nowcast/nn/layers.hpp"

namespace nowcast::nn {

using nowcast::detail::accumulate;
using nowcast::detail::attach;
using nowcast::detail::make_tensor;

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t channels) {
  BatchNormParams p;
  p.gamma = Tensor<T>(Shape{channels}, T{1});
  p.beta = Tensor<T>(Shape{channels}, T{0});
  p.running_mean = Tensor<T>(Shape{channels}, T{0});
  p.running_var = Tensor<T>(Shape{channels}, T{1});
  return p;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const BatchNormParams<T>& p, Mode mode) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError("batchnorm2d: input must be [C,H,W] or [N,C,H,W], got " + shape_str(x.shape()));
  }
  const std::size_t r = x.rank();
  const std::size_t channels = x.dim(r - 3);
  const std::size_t plane = x.dim(r - 2) * x.dim(r - 1);
  const std::size_t outer = r == 4 ? x.dim(0) : 1;
  const std::size_t population = outer * plane;
  for (const auto* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
    if (!t->defined() || t->shape() != Shape{channels}) {
      throw ShapeError("batchnorm2d: parameters do not match " + std::to_string(channels) +
                       " channels of " + shape_str(x.shape()));
    }
  }
  if (mode != Mode::eval && population < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel, got " +
                     shape_str(x.shape()));
  }

  const auto src = x.data();
  const auto gamma = p.gamma.data();
  const auto beta = p.beta.data();
  auto at = [&](std::size_t n, std::size_t c) { return (n * channels + c) * plane; };

  std::vector<T> mean(channels);
  std::vector<T> inv_std(channels);
  if (mode != Mode::eval) {
    const bool update = mode == Mode::train;
    const auto running_mean = p.running_mean.mutable_data();
    const auto running_var = p.running_var.mutable_data();
    for (std::size_t c = 0; c < channels; ++c) {
      T acc{0};
      for (std::size_t n = 0; n < outer; ++n) {
        for (std::size_t i = 0; i < plane; ++i) acc += src[at(n, c) + i];
      }
      const T mu = acc / static_cast<T>(population);
      T sq{0};
      for (std::size_t n = 0; n < outer; ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = src[at(n, c) + i] - mu;
          sq += d * d;
        }
      }
      const T var = sq / static_cast<T>(population);
      mean[c] = mu;
      inv_std[c] = T{1} / std::sqrt(var + p.eps);
      const T unbiased = sq / static_cast<T>(population - 1);
      if (update) {
        running_mean[c] = (T{1} - p.momentum) * running_mean[c] + p.momentum * mu;
        running_var[c] = (T{1} - p.momentum) * running_var[c] + p.momentum * unbiased;
      }
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = p.running_mean.data()[c];
      inv_std[c] = T{1} / std::sqrt(p.running_var.data()[c] + p.eps);
    }
  }

  std::vector<T> xhat(x.numel());
  std::vector<T> y(x.numel());
  for (std::size_t n = 0; n < outer; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = at(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const T v = (src[base + i] - mean[c]) * inv_std[c];
        xhat[base + i] = v;
        y[base + i] = gamma[c] * v + beta[c];
      }
    }
  }

  auto out = make_tensor<T>(x.shape(), std::move(y));
  auto xi = x.impl();
  auto gi = p.gamma.impl();
  auto bi = p.beta.impl();
  const bool train = mode != Mode::eval;
  attach(out, "batchnorm2d", {&x, &p.gamma, &p.beta},
         [xi, gi, bi, xhat = std::move(xhat), inv_std, train, channels, plane, outer,
          population](const nowcast::detail::TensorImpl<T>& o) {
           auto at = [&](std::size_t n, std::size_t c) { return (n * channels + c) * plane; };
           std::vector<T> sum_g(channels, T{0});
           std::vector<T> sum_gx(channels, T{0});
           for (std::size_t n = 0; n < outer; ++n) {
             for (std::size_t c = 0; c < channels; ++c) {
               const std::size_t base = at(n, c);
               for (std::size_t i = 0; i < plane; ++i) {
                 sum_g[c] += o.grad[base + i];
                 sum_gx[c] += o.grad[base + i] * xhat[base + i];
               }
             }
           }
           accumulate(bi, [&](std::vector<T>& g) {
             for (std::size_t c = 0; c < channels; ++c) g[c] += sum_g[c];
           });
           accumulate(gi, [&](std::vector<T>& g) {
             for (std::size_t c = 0; c < channels; ++c) g[c] += sum_gx[c];
           });
           accumulate(xi, [&](std::vector<T>& g) {
             const T m = static_cast<T>(population);
             for (std::size_t n = 0; n < outer; ++n) {
               for (std::size_t c = 0; c < channels; ++c) {
                 const T scale_c = gi->data[c] * inv_std[c];
                 const std::size_t base = at(n, c);
                 if (train) {
                   // dx = gamma*inv_std/m * (m*g - sum(g) - xhat*sum(g*xhat))
                   const T mean_g = sum_g[c] / m;
                   const T mean_gx = sum_gx[c] / m;
                   for (std::size_t i = 0; i < plane; ++i) {
                     g[base + i] += scale_c * (o.grad[base + i] - mean_g - xhat[base + i] * mean_gx);
                   }
                 } else {
                   for (std::size_t i = 0; i < plane; ++i) g[base + i] += scale_c * o.grad[base + i];
                 }
               }
             }
           });
         });
  return out;
}

#define NOWCAST_INSTANTIATE(T)             \
  template struct BatchNormParams<T>;      \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const BatchNormParams<T>&, Mode);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::nn
