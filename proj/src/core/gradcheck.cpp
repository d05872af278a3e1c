#include "nowcast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nowcast/autodiff.hpp"

namespace nowcast {

namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  NoGradGuard no_grad;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("fd_check: non-finite function value");
  return v;
}

}  // namespace

double fd_check(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& wrt,
                double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw std::invalid_argument("fd_check: eps must be in (0, 1e-2]");

  std::vector<bool> previous;
  for (const auto& x : wrt) {
    for (double v : x.data()) {
      if (!std::isfinite(v)) throw NumericError("fd_check: non-finite input value");
    }
    previous.push_back(x.requires_grad());
    Tensor<double> handle = x;
    handle.set_requires_grad(true);
    x.zero_grad();
  }

  const auto root = f();
  if (!std::isfinite(root.item())) throw NumericError("fd_check: non-finite function value");
  backward(root);

  double worst = 0.0;
  for (const auto& x : wrt) {
    const auto values = x.mutable_data();
    const std::vector<double> analytic = x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                                      : std::vector<double>(x.numel(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate(f);
      values[i] = saved - eps;
      const double down = evaluate(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      if (!std::isfinite(analytic[i])) throw NumericError("fd_check: non-finite analytic gradient");
      worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Tensor<double> handle = wrt[k];
    handle.set_requires_grad(previous[k]);
  }
  return worst;
}

double fd_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                const Tensor<double>& x, double eps) {
  return fd_check([&] { return f(x); }, std::vector<Tensor<double>>{x}, eps);
}

}  // namespace nowcast
