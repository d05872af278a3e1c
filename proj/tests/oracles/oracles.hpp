#pragma once

// Straightforward reference implementations, written without any of the
// library's kernels, used to cross-check the optimized code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// exp(1 - min(|y|,|p|)/255) * (y - p)^2 summed over an m x n image.
inline double forecaster_loss(const std::vector<double>& y, const std::vector<double>& p,
                              std::size_t m, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = y[i * n + j];
      const double b = p[i * n + j];
      const double smaller = std::min(std::fabs(a), std::fabs(b));
      const double weight = std::exp(1.0 - smaller / 255.0);
      total += weight * (a - b) * (a - b);
    }
  }
  return total;
}

struct ScalarNadam {
  double lr = 0.002, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  int t = 0;

  double step(double theta, double g) {
    t += 1;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double b1t = std::pow(beta1, t);
    const double m_hat = m / (1 - b1t);
    const double v_hat = v / (1 - std::pow(beta2, t));
    const double nesterov = beta1 * m_hat + (1 - beta1) * g / (1 - b1t);
    return theta - lr * nesterov / (std::sqrt(v_hat) + eps);
  }
};

// Direct 7-loop convolution. x [C,H,W], w [O,C,k,k], result [O,Ho,Wo].
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t c, std::size_t h,
                                  std::size_t w, const std::vector<double>& wt, std::size_t o,
                                  std::size_t k, std::size_t stride, std::size_t pad,
                                  const std::vector<double>& bias = {}) {
  const std::size_t ho = (h + 2 * pad - k) / stride + 1;
  const std::size_t wo = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(o * ho * wo, 0.0);
  for (std::size_t oc = 0; oc < o; ++oc)
    for (std::size_t r = 0; r < ho; ++r)
      for (std::size_t s = 0; s < wo; ++s) {
        double acc = bias.empty() ? 0.0 : bias[oc];
        for (std::size_t ic = 0; ic < c; ++ic)
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
              const long ih = static_cast<long>(r * stride + a) - static_cast<long>(pad);
              const long iw = static_cast<long>(s * stride + b) - static_cast<long>(pad);
              if (ih < 0 || iw < 0 || ih >= static_cast<long>(h) || iw >= static_cast<long>(w)) continue;
              acc += x[(ic * h + ih) * w + iw] * wt[((oc * c + ic) * k + a) * k + b];
            }
        y[(oc * ho + r) * wo + s] = acc;
      }
  return y;
}

// Scatter form of the transposed convolution. x [Ci,H,W], w [Ci,Co,k,k].
inline std::vector<double> conv_transpose2d(const std::vector<double>& x, std::size_t ci,
                                            std::size_t h, std::size_t w,
                                            const std::vector<double>& wt, std::size_t co,
                                            std::size_t k, std::size_t stride, std::size_t pad) {
  const long ho = static_cast<long>((h - 1) * stride + k) - 2 * static_cast<long>(pad);
  const long wo = static_cast<long>((w - 1) * stride + k) - 2 * static_cast<long>(pad);
  std::vector<double> y(co * ho * wo, 0.0);
  for (std::size_t ic = 0; ic < ci; ++ic)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t s = 0; s < w; ++s)
        for (std::size_t oc = 0; oc < co; ++oc)
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
              const long oh = static_cast<long>(r * stride + a) - static_cast<long>(pad);
              const long ow = static_cast<long>(s * stride + b) - static_cast<long>(pad);
              if (oh < 0 || ow < 0 || oh >= ho || ow >= wo) continue;
              y[(oc * ho + oh) * wo + ow] += x[(ic * h + r) * w + s] * wt[((ic * co + oc) * k + a) * k + b];
            }
  return y;
}

}  // namespace oracle
