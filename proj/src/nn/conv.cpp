#include <memory>
#include <string>
#include <vector>

#include "gemm.hpp"
#include "nowcast/detail/graph.hpp"
#include "nowcast/nn/layers.hpp"

namespace nowcast::nn {

using nowcast::detail::accumulate;
using nowcast::detail::attach;
using nowcast::detail::make_tensor;

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0 || kernel == 0) throw ShapeError("conv: kernel and stride must be positive");
  const std::size_t padded = extent + 2 * padding;
  if (padded < kernel || (padded - kernel) % stride != 0) {
    throw ShapeError("conv: extent " + std::to_string(extent) + " with kernel " +
                     std::to_string(kernel) + ", stride " + std::to_string(stride) +
                     ", padding " + std::to_string(padding) + " gives a non-integral output");
  }
  return (padded - kernel) / stride + 1;
}

std::size_t conv_transpose_output_extent(std::size_t extent, std::size_t kernel,
                                         std::size_t stride, std::size_t padding) {
  if (stride == 0 || kernel == 0) throw ShapeError("conv_transpose: kernel and stride must be positive");
  const std::size_t full = (extent - 1) * stride + kernel;
  if (full <= 2 * padding) {
    throw ShapeError("conv_transpose: padding " + std::to_string(padding) +
                     " leaves no output for extent " + std::to_string(extent));
  }
  return full - 2 * padding;
}

namespace {

struct Geometry {
  std::size_t batch;
  bool batched;
  std::size_t in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t kernel, stride, padding;
};

template <typename T>
void check_kernel(const char* op, const Tensor<T>& x, const Conv2dParams<T>& p, std::size_t in_axis) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(std::string(op) + ": input must be [C,H,W] or [N,C,H,W], got " + shape_str(x.shape()));
  }
  if (!p.weight.defined() || p.weight.rank() != 4 || p.weight.dim(2) != p.weight.dim(3)) {
    throw ShapeError(std::string(op) + ": weight must be a square 4-d kernel");
  }
  const std::size_t channels = x.dim(x.rank() - 3);
  if (p.weight.dim(in_axis) != channels) {
    throw ShapeError(std::string(op) + ": input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(p.weight.shape()));
  }
}

template <typename T>
void check_bias(const char* op, const Conv2dParams<T>& p, std::size_t out_c) {
  if (p.bias.defined() && p.bias.shape() != Shape{out_c}) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(p.bias.shape()) + " does not match " +
                     std::to_string(out_c) + " output channels");
  }
}

Shape output_shape(const Geometry& g) {
  if (g.batched) return {g.batch, g.out_c, g.out_h, g.out_w};
  return {g.out_c, g.out_h, g.out_w};
}

template <typename T>
void add_bias(std::vector<T>& y, const Tensor<T>& bias, const Geometry& g) {
  if (!bias.defined()) return;
  const auto b = bias.data();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.out_c; ++c) {
      T* dst = y.data() + (n * g.out_c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += b[c];
    }
  }
}

template <typename T>
void bias_grad(std::vector<T>& gb, const std::vector<T>& gy, const Geometry& g) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.out_c; ++c) {
      const T* src = gy.data() + (n * g.out_c + c) * plane;
      T acc{0};
      for (std::size_t i = 0; i < plane; ++i) acc += src[i];
      gb[c] += acc;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p) {
  check_kernel("conv2d", x, p, 1);
  Geometry g{};
  g.batched = x.rank() == 4;
  g.batch = g.batched ? x.dim(0) : 1;
  g.in_c = x.dim(x.rank() - 3);
  g.in_h = x.dim(x.rank() - 2);
  g.in_w = x.dim(x.rank() - 1);
  g.out_c = p.weight.dim(0);
  g.kernel = p.weight.dim(2);
  g.stride = p.stride;
  g.padding = p.padding;
  g.out_h = conv_output_extent(g.in_h, g.kernel, g.stride, g.padding);
  g.out_w = conv_output_extent(g.in_w, g.kernel, g.stride, g.padding);
  check_bias("conv2d", p, g.out_c);

  const std::size_t patch = g.in_c * g.kernel * g.kernel;
  const std::size_t cols_n = g.out_h * g.out_w;
  const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t in_image = g.in_c * g.in_h * g.in_w;
  const std::size_t out_image = g.out_c * cols_n;

  std::vector<T> y(g.batch * out_image);
  // The patch matrices are kept for the weight gradient when one is coming.
  const bool keep = !pointwise && grad_enabled() && p.weight.requires_grad();
  auto saved = std::make_shared<std::vector<T>>(keep ? g.batch * patch * cols_n : 0);
  std::vector<T> cols(pointwise || keep ? 0 : patch * cols_n);
  const T* w = p.weight.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.data().data() + n * in_image;
    const T* src = xn;
    if (!pointwise) {
      T* buf = keep ? saved->data() + n * patch * cols_n : cols.data();
      detail::im2col(xn, g.in_c, g.in_h, g.in_w, g.kernel, g.stride, g.padding, g.out_h, g.out_w, buf);
      src = buf;
    }
    detail::gemm(false, false, g.out_c, cols_n, patch, w, src, y.data() + n * out_image, false);
  }
  add_bias(y, p.bias, g);

  auto out = make_tensor<T>(output_shape(g), std::move(y));
  auto xi = x.impl();
  auto wi = p.weight.impl();
  auto bi = p.bias.defined() ? p.bias.impl() : nullptr;
  attach(out, "conv2d", {&x, &p.weight, &p.bias}, [xi, wi, bi, g, saved](const nowcast::detail::TensorImpl<T>& o) {
    const std::size_t patch = g.in_c * g.kernel * g.kernel;
    const std::size_t cols_n = g.out_h * g.out_w;
    const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
    const std::size_t in_image = g.in_c * g.in_h * g.in_w;
    const std::size_t out_image = g.out_c * cols_n;
    std::vector<T> cols(pointwise ? 0 : patch * cols_n);
    accumulate(wi, [&](std::vector<T>& gw) {
      for (std::size_t n = 0; n < g.batch; ++n) {
        const T* src = xi->data.data() + n * in_image;
        if (!saved->empty()) {
          src = saved->data() + n * patch * cols_n;
        } else if (!pointwise) {
          detail::im2col(src, g.in_c, g.in_h, g.in_w, g.kernel, g.stride, g.padding, g.out_h,
                         g.out_w, cols.data());
          src = cols.data();
        }
        detail::gemm(false, true, g.out_c, patch, cols_n, o.grad.data() + n * out_image, src,
                     gw.data(), true);
      }
    });
    accumulate(bi, [&](std::vector<T>& gb) { bias_grad(gb, o.grad, g); });
    accumulate(xi, [&](std::vector<T>& gx) {
      for (std::size_t n = 0; n < g.batch; ++n) {
        T* dst = gx.data() + n * in_image;
        if (pointwise) {
          detail::gemm(true, false, patch, cols_n, g.out_c, wi->data.data(),
                       o.grad.data() + n * out_image, dst, true);
        } else {
          detail::gemm(true, false, patch, cols_n, g.out_c, wi->data.data(),
                       o.grad.data() + n * out_image, cols.data(), false);
          detail::col2im(cols.data(), g.in_c, g.in_h, g.in_w, g.kernel, g.stride, g.padding,
                         g.out_h, g.out_w, dst);
        }
      }
    });
  });
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Conv2dParams<T>& p) {
  check_kernel("conv_transpose2d", x, p, 0);
  Geometry g{};
  g.batched = x.rank() == 4;
  g.batch = g.batched ? x.dim(0) : 1;
  g.in_c = x.dim(x.rank() - 3);
  g.in_h = x.dim(x.rank() - 2);
  g.in_w = x.dim(x.rank() - 1);
  g.out_c = p.weight.dim(1);
  g.kernel = p.weight.dim(2);
  g.stride = p.stride;
  g.padding = p.padding;
  g.out_h = conv_transpose_output_extent(g.in_h, g.kernel, g.stride, g.padding);
  g.out_w = conv_transpose_output_extent(g.in_w, g.kernel, g.stride, g.padding);
  check_bias("conv_transpose2d", p, g.out_c);

  // Viewed as the conv2d that maps [out_c,out_h,out_w] -> [in_c,in_h,in_w].
  const std::size_t patch = g.out_c * g.kernel * g.kernel;
  const std::size_t cols_n = g.in_h * g.in_w;
  const std::size_t in_image = g.in_c * cols_n;
  const std::size_t out_image = g.out_c * g.out_h * g.out_w;

  std::vector<T> y(g.batch * out_image, T{0});
  std::vector<T> cols(patch * cols_n);
  const T* w = p.weight.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    detail::gemm(true, false, patch, cols_n, g.in_c, w, x.data().data() + n * in_image, cols.data(),
                 false);
    detail::col2im(cols.data(), g.out_c, g.out_h, g.out_w, g.kernel, g.stride, g.padding, g.in_h,
                   g.in_w, y.data() + n * out_image);
  }
  add_bias(y, p.bias, g);

  auto out = make_tensor<T>(output_shape(g), std::move(y));
  auto xi = x.impl();
  auto wi = p.weight.impl();
  auto bi = p.bias.defined() ? p.bias.impl() : nullptr;
  attach(out, "conv_transpose2d", {&x, &p.weight, &p.bias},
         [xi, wi, bi, g](const nowcast::detail::TensorImpl<T>& o) {
           const std::size_t patch = g.out_c * g.kernel * g.kernel;
           const std::size_t cols_n = g.in_h * g.in_w;
           const std::size_t in_image = g.in_c * cols_n;
           const std::size_t out_image = g.out_c * g.out_h * g.out_w;
           const bool need_w = wi->requires_grad;
           const bool need_x = xi->requires_grad;
           std::vector<T> cols(patch * cols_n);
           for (std::size_t n = 0; n < g.batch; ++n) {
             if (!need_w && !need_x) break;
             detail::im2col(o.grad.data() + n * out_image, g.out_c, g.out_h, g.out_w, g.kernel,
                            g.stride, g.padding, g.in_h, g.in_w, cols.data());
             accumulate(wi, [&](std::vector<T>& gw) {
               detail::gemm(false, true, g.in_c, patch, cols_n, xi->data.data() + n * in_image,
                            cols.data(), gw.data(), true);
             });
             accumulate(xi, [&](std::vector<T>& gx) {
               detail::gemm(false, false, g.in_c, cols_n, patch, wi->data.data(), cols.data(),
                            gx.data() + n * in_image, true);
             });
           }
           accumulate(bi, [&](std::vector<T>& gb) { bias_grad(gb, o.grad, g); });
         });
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 1 || weight.rank() != 2 || weight.dim(1) != x.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t d_out = weight.dim(0);
  const std::size_t d_in = weight.dim(1);
  if (bias.defined() && bias.shape() != Shape{d_out}) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  std::vector<T> y(d_out, T{0});
  detail::gemm(false, false, d_out, 1, d_in, weight.data().data(), x.data().data(), y.data(), false);
  if (bias.defined()) {
    for (std::size_t i = 0; i < d_out; ++i) y[i] += bias.data()[i];
  }
  auto out = make_tensor<T>(Shape{d_out}, std::move(y));
  auto xi = x.impl();
  auto wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  attach(out, "linear", {&x, &weight, &bias}, [xi, wi, bi, d_in, d_out](const nowcast::detail::TensorImpl<T>& o) {
    accumulate(wi, [&](std::vector<T>& gw) {
      detail::gemm(false, false, d_out, d_in, 1, o.grad.data(), xi->data.data(), gw.data(), true);
    });
    accumulate(bi, [&](std::vector<T>& gb) {
      for (std::size_t i = 0; i < d_out; ++i) gb[i] += o.grad[i];
    });
    accumulate(xi, [&](std::vector<T>& gx) {
      detail::gemm(true, false, d_in, 1, d_out, wi->data.data(), o.grad.data(), gx.data(), true);
    });
  });
  return out;
}

#define NOWCAST_INSTANTIATE(T)                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2dParams<T>&);          \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Conv2dParams<T>&); \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::nn
