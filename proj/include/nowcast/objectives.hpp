#pragma once

// Training losses and evaluation metrics. Images are [1,M,N] (or any shape
// for the losses) on the 0-255 pixel scale. Argument order is always
// (ground truth, prediction).

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/datasets/sample.hpp"
#include "nowcast/models.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::objectives {

enum class LossKind { mse, forecaster };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

// Mean of (y - yhat)^2 over all pixels.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& y, const Tensor<T>& yhat);

// sum_ij exp(1 - min(|y|,|yhat|)/255) * (y - yhat)^2, evaluated on the raw
// prediction. Throws NumericError on a non-finite prediction.
template <typename T>
Tensor<T> forecaster_loss(const Tensor<T>& y, const Tensor<T>& yhat);

// forecaster_loss divided by the pixel count; the form used for training.
template <typename T>
Tensor<T> forecaster_loss_mean(const Tensor<T>& y, const Tensor<T>& yhat);

// Per-pixel training loss of the given kind.
template <typename T>
Tensor<T> pixel_loss(LossKind kind, const Tensor<T>& y, const Tensor<T>& yhat);

// Sum of the per-scale losses plus the loss of the fused prediction.
template <typename T>
Tensor<T> multiscale_loss(const models::MultiScaleOutput<T>& out, const Tensor<T>& y, LossKind kind);

// Metrics clamp the prediction to [0,255] and compute in double precision.

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

double clamped_mse(const Tensor<double>& y, const Tensor<double>& yhat);
double psnr_from_mse(double mse);
double psnr(const Tensor<double>& y, const Tensor<double>& yhat);
// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) over the valid
// region. Accepts [M,N] or [1,M,N].
double ssim(const Tensor<double>& y, const Tensor<double>& yhat);
// Fraction of pixels strictly above tau.
double eccr(const Tensor<double>& pred, double tau);

inline constexpr double kDefaultEccrTau = 30.0;

struct MetricsReport {
  double mse = 0;
  double psnr_db = 0;
  double ssim = 0;
  double eccr = 0;
  std::size_t n_samples = 0;
};

MetricsReport sample_metrics(const Tensor<double>& y, const Tensor<double>& yhat, double tau);

// Arithmetic mean of per-sample metrics. An infinite per-sample PSNR makes
// the mean infinite.
MetricsReport evaluate_predictions(const std::vector<Tensor<double>>& truths,
                                   const std::vector<Tensor<double>>& predictions, double tau);

// Runs the model (eval mode, no gradients) on every sample; each sample's
// last `input_frames` frames before the target are fed in.
template <typename T>
std::vector<Tensor<double>> predict_set(const models::ModelGraph<T>& model,
                                        const datasets::Dataset& data);

template <typename T>
MetricsReport evaluate_set(const models::ModelGraph<T>& model, const datasets::Dataset& data,
                           double tau = kDefaultEccrTau);

// {"mse":..,"psnr_db":..,"ssim":..,"eccr":..,"n_samples":..}; infinite PSNR
// becomes the string "inf".
nlohmann::json to_json(const MetricsReport& report);

}  // namespace nowcast::objectives
