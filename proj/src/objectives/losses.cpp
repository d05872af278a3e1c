#include "nowcast/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "nowcast/autodiff.hpp"
#include "nowcast/detail/graph.hpp"

namespace nowcast::objectives {

using detail::accumulate;
using detail::attach;
using detail::make_tensor;

std::string to_string(LossKind kind) {
  return kind == LossKind::mse ? "mse" : "forecaster";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "mse") return LossKind::mse;
  if (text == "forecaster") return LossKind::forecaster;
  throw std::invalid_argument("unknown loss: " + text + " (expected mse or forecaster)");
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& y, const Tensor<T>& yhat) {
  detail::require_same_shape("mse_loss", y, yhat);
  const auto a = y.data();
  const auto b = yhat.data();
  const T inv_n = T{1} / static_cast<T>(a.size());
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = static_cast<double>(b[i]) - static_cast<double>(a[i]);
    acc += r * r;
  }
  auto out = make_tensor<T>({}, {static_cast<T>(acc / static_cast<double>(a.size()))});
  auto yi = y.impl();
  auto pi = yhat.impl();
  attach(out, "mse_loss", {&y, &yhat}, [yi, pi, inv_n](const detail::TensorImpl<T>& o) {
    const T g0 = o.grad[0] * 2 * inv_n;
    accumulate(pi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * (pi->data[i] - yi->data[i]);
    });
    accumulate(yi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= g0 * (pi->data[i] - yi->data[i]);
    });
  });
  return out;
}

namespace {

// Fused weighted squared error, scaled by `factor` (1 for the raw sum).
//   w = e * exp(-min(|y|,|p|)/255),  L = factor * sum w (p - y)^2
// The minimum follows min2's tie rule: on |y| == |p| the weight depends on y.
template <typename T>
Tensor<T> forecaster_impl(const Tensor<T>& y, const Tensor<T>& yhat, double factor) {
  detail::require_same_shape("forecaster_loss", y, yhat);
  const auto a = y.data();
  const auto b = yhat.data();
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(static_cast<double>(b[i]))) {
      throw NumericError("forecaster_loss: non-finite prediction at index " + std::to_string(i));
    }
    const double ya = std::abs(static_cast<double>(a[i]));
    const double pa = std::abs(static_cast<double>(b[i]));
    const double w = std::exp(1.0 - (ya <= pa ? ya : pa) / 255.0);
    const double r = static_cast<double>(b[i]) - static_cast<double>(a[i]);
    acc += w * r * r;
  }
  auto out = make_tensor<T>({}, {static_cast<T>(acc * factor)});
  auto yi = y.impl();
  auto pi = yhat.impl();
  attach(out, "forecaster_loss", {&y, &yhat}, [yi, pi, factor](const detail::TensorImpl<T>& o) {
    const double g0 = static_cast<double>(o.grad[0]) * factor;
    const std::size_t n = yi->data.size();
    std::vector<double> dy(n), dp(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double yv = yi->data[i];
      const double pv = pi->data[i];
      const double ya = std::abs(yv);
      const double pa = std::abs(pv);
      const bool y_is_min = ya <= pa;
      const double w = std::exp(1.0 - (y_is_min ? ya : pa) / 255.0);
      const double r = pv - yv;
      // dw/dm = -w/255 where m is the selected |.|; d|x|/dx = sign(x), 0 at 0.
      const double dw = -w / 255.0 * r * r;
      dp[i] = 2 * w * r;
      dy[i] = -2 * w * r;
      if (y_is_min) {
        if (yv != 0) dy[i] += dw * (yv > 0 ? 1 : -1);
      } else if (pv != 0) {
        dp[i] += dw * (pv > 0 ? 1 : -1);
      }
    }
    accumulate(pi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < n; ++i) g[i] += static_cast<T>(g0 * dp[i]);
    });
    accumulate(yi, [&](std::vector<T>& g) {
      for (std::size_t i = 0; i < n; ++i) g[i] += static_cast<T>(g0 * dy[i]);
    });
  });
  return out;
}

}  // namespace

template <typename T>
Tensor<T> forecaster_loss(const Tensor<T>& y, const Tensor<T>& yhat) {
  return forecaster_impl(y, yhat, 1.0);
}

template <typename T>
Tensor<T> forecaster_loss_mean(const Tensor<T>& y, const Tensor<T>& yhat) {
  return forecaster_impl(y, yhat, 1.0 / static_cast<double>(y.numel()));
}

template <typename T>
Tensor<T> pixel_loss(LossKind kind, const Tensor<T>& y, const Tensor<T>& yhat) {
  return kind == LossKind::mse ? mse_loss(y, yhat) : forecaster_loss_mean(y, yhat);
}

template <typename T>
Tensor<T> multiscale_loss(const models::MultiScaleOutput<T>& out, const Tensor<T>& y, LossKind kind) {
  Tensor<T> total = pixel_loss(kind, y, out.fused);
  for (const auto& p : out.per_scale) {
    if (p.shape() != y.shape()) {
      throw ShapeError("multiscale_loss: per-scale prediction " + shape_str(p.shape()) +
                       " does not match target " + shape_str(y.shape()));
    }
    total = add(total, pixel_loss(kind, y, p));
  }
  return total;
}

#define NOWCAST_INSTANTIATE(T)                                                            \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> forecaster_loss(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> forecaster_loss_mean(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> pixel_loss(LossKind, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> multiscale_loss(const models::MultiScaleOutput<T>&, const Tensor<T>&, \
                                     LossKind);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::objectives
