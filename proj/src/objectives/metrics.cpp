#include "nowcast/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace nowcast::objectives {

namespace {

double clamp_pixel(double v) { return std::clamp(v, 0.0, 255.0); }

void require_match(const char* what, const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Height and width of an [M,N] or [1,M,N] image.
std::pair<std::size_t, std::size_t> image_extent(const char* what, const Tensor<double>& t) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
  throw ShapeError(std::string(what) + ": expected [M,N] or [1,M,N], got " + shape_str(t.shape()));
}

constexpr std::size_t kWindow = 11;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double total = 0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    taps[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

// Separable Gaussian filtering restricted to the valid region.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& taps) {
  const std::size_t ow = w - kWindow + 1;
  const std::size_t oh = h - kWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * img[r * w + c + k];
      rows[r * ow + c] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * rows[(r + k) * ow + c];
      out[r * ow + c] = acc;
    }
  }
  return out;
}

}  // namespace

double clamped_mse(const Tensor<double>& y, const Tensor<double>& yhat) {
  require_match("mse", y, yhat);
  const auto a = y.data();
  const auto b = yhat.data();
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = clamp_pixel(b[i]) - a[i];
    acc += r * r;
  }
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double mse) {
  if (mse <= 0) return kPsnrInfinity;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const Tensor<double>& y, const Tensor<double>& yhat) {
  return psnr_from_mse(clamped_mse(y, yhat));
}

double ssim(const Tensor<double>& y, const Tensor<double>& yhat) {
  require_match("ssim", y, yhat);
  const auto [h, w] = image_extent("ssim", y);
  if (h < kWindow || w < kWindow) {
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the 11x11 window");
  }
  const std::size_t n = h * w;
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = clamp_pixel(y.data()[i]);
    b[i] = clamp_pixel(yhat.data()[i]);
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto taps = gaussian_taps();
  const auto mu_a = filter_valid(a, h, w, taps);
  const auto mu_b = filter_valid(b, h, w, taps);
  const auto s_aa = filter_valid(aa, h, w, taps);
  const auto s_bb = filter_valid(bb, h, w, taps);
  const auto s_ab = filter_valid(ab, h, w, taps);

  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = s_aa[i] - ma * ma;
    const double vb = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double eccr(const Tensor<double>& pred, double tau) {
  std::size_t count = 0;
  for (double v : pred.data()) {
    if (clamp_pixel(v) > tau) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(pred.numel());
}

MetricsReport sample_metrics(const Tensor<double>& y, const Tensor<double>& yhat, double tau) {
  MetricsReport r;
  r.mse = clamped_mse(y, yhat);
  r.psnr_db = psnr_from_mse(r.mse);
  r.ssim = ssim(y, yhat);
  r.eccr = eccr(yhat, tau);
  r.n_samples = 1;
  return r;
}

MetricsReport evaluate_predictions(const std::vector<Tensor<double>>& truths,
                                   const std::vector<Tensor<double>>& predictions, double tau) {
  if (truths.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (truths.size() != predictions.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(truths.size()) + " targets but " +
                                std::to_string(predictions.size()) + " predictions");
  }
  MetricsReport total;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto r = sample_metrics(truths[i], predictions[i], tau);
    total.mse += r.mse;
    total.psnr_db += r.psnr_db;
    total.ssim += r.ssim;
    total.eccr += r.eccr;
  }
  const double n = static_cast<double>(truths.size());
  total.mse /= n;
  total.psnr_db /= n;
  total.ssim /= n;
  total.eccr /= n;
  total.n_samples = truths.size();
  return total;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mse"] = report.mse;
  if (std::isinf(report.psnr_db)) {
    j["psnr_db"] = "inf";
  } else {
    j["psnr_db"] = report.psnr_db;
  }
  j["ssim"] = report.ssim;
  j["eccr"] = report.eccr;
  j["n_samples"] = report.n_samples;
  return j;
}

}  // namespace nowcast::objectives
