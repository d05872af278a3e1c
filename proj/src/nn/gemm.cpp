#include "gemm.hpp"

#include <algorithm>

#include <Eigen/Core>

namespace nowcast::nn::detail {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMajor<T>>;
template <typename T>
using Map = Eigen::Map<RowMajor<T>>;

template <typename T, typename L, typename R>
void assign(Map<T>& c, const L& lhs, const R& rhs, bool accumulate) {
  if (accumulate) {
    c.noalias() += lhs * rhs;
  } else {
    c.noalias() = lhs * rhs;
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map<T> cm(c, M, N);
  if (!trans_a && !trans_b) {
    assign(cm, ConstMap<T>(a, M, K), ConstMap<T>(b, K, N), accumulate);
  } else if (trans_a && !trans_b) {
    assign(cm, ConstMap<T>(a, K, M).transpose(), ConstMap<T>(b, K, N), accumulate);
  } else if (!trans_a && trans_b) {
    assign(cm, ConstMap<T>(a, M, K), ConstMap<T>(b, N, K).transpose(), accumulate);
  } else {
    assign(cm, ConstMap<T>(a, K, M).transpose(), ConstMap<T>(b, N, K).transpose(), accumulate);
  }
}

namespace {

// Output columns [lo, hi) whose input column ow*s - pad + kj lies inside [0, W).
struct ColumnRange {
  std::size_t lo, hi;
};

ColumnRange valid_columns(std::ptrdiff_t W, std::ptrdiff_t pad, std::ptrdiff_t s, std::ptrdiff_t kj,
                          std::size_t out_w) {
  const std::ptrdiff_t first = pad - kj;  // need ow*s >= first
  const std::ptrdiff_t last = W - 1 + pad - kj;  // need ow*s <= last
  std::ptrdiff_t lo = first <= 0 ? 0 : (first + s - 1) / s;
  std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_w));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_h,
            std::size_t out_w, T* cols) {
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kernel; ++ki) {
      for (std::size_t kj = 0; kj < kernel; ++kj) {
        T* row = cols + ((c * kernel + ki) * kernel + kj) * out_h * out_w;
        const auto kjs = static_cast<std::ptrdiff_t>(kj);
        const auto [lo, hi] = valid_columns(W, pad, s, kjs, out_w);
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s - pad + static_cast<std::ptrdiff_t>(ki);
          T* dst = row + oh * out_w;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          std::fill(dst, dst + lo, T{0});
          std::fill(dst + hi, dst + out_w, T{0});
          const T* src = plane + ih * W - pad + kjs;
          if (s == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[static_cast<std::ptrdiff_t>(ow) * s];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_h,
            std::size_t out_w, T* image) {
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kernel; ++ki) {
      for (std::size_t kj = 0; kj < kernel; ++kj) {
        const T* row = cols + ((c * kernel + ki) * kernel + kj) * out_h * out_w;
        const auto kjs = static_cast<std::ptrdiff_t>(kj);
        const auto [lo, hi] = valid_columns(W, pad, s, kjs, out_w);
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s - pad + static_cast<std::ptrdiff_t>(ki);
          if (ih < 0 || ih >= H) continue;
          const T* src = row + oh * out_w;
          T* dst = plane + ih * W - pad + kjs;
          if (s == 1) {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] += src[ow];
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[static_cast<std::ptrdiff_t>(ow) * s] += src[ow];
          }
        }
      }
    }
  }
}

#define NOWCAST_INSTANTIATE(T)                                                                  \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, const T*, const T*, \
                        T*, bool);                                                              \
  template void im2col<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,        \
                          std::size_t, std::size_t, std::size_t, std::size_t, T*);             \
  template void col2im<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,        \
                          std::size_t, std::size_t, std::size_t, std::size_t, T*);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::nn::detail
