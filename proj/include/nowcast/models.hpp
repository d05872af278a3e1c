#pragma once

// F-CLSTM and the three comparison baselines (stacked ConvLSTM, FC-LSTM, MLP).
//
// All models take frames [T,1,H,W] on the 0-255 pixel scale and predict the
// next frame [1,H,W] on the same scale. Internally inputs are divided by 255
// and the linear output head is multiplied back; predictions are not clamped.

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "nowcast/model_config.hpp"
#include "nowcast/nn/layers.hpp"
#include "nowcast/parameters.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::models {

inline constexpr double kPixelScale = 255.0;

template <typename T>
struct ConvBnBlock {
  nn::Conv2dParams<T> conv;
  nn::BatchNormParams<T> bn;
};

// Mirror of the encoder path below one scale: (upsample x2 -> deconv -> bn ->
// relu) per pooled level, then a deconvolution to a single channel.
template <typename T>
struct Decoder {
  std::vector<ConvBnBlock<T>> stages;
  nn::Conv2dParams<T> head;
};

template <typename T>
struct FclstmNet {
  std::vector<ConvBnBlock<T>> seq_conv;
  std::vector<nn::ConvLstmParams<T>> lstm;
  std::vector<Decoder<T>> decoders;
  ConvBnBlock<T> fuse_hidden;
  nn::Conv2dParams<T> fuse_out;
};

template <typename T>
struct ClstmNet {
  std::vector<nn::ConvLstmParams<T>> lstm;
  Decoder<T> decoder;
};

template <typename T>
struct FcLstmNet {
  nn::LstmParams<T> cell;
  Tensor<T> head_weight;
  Tensor<T> head_bias;
};

template <typename T>
struct MlpNet {
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
};

template <typename T>
using Network = std::variant<FclstmNet<T>, ClstmNet<T>, FcLstmNet<T>, MlpNet<T>>;

// A built network. The layer structs in `net` alias the tensors registered in
// `params`, so the table is the single place to read or overwrite weights.
template <typename T>
struct ModelGraph {
  ModelConfig config;
  ParameterTable<T> params;
  Network<T> net;

  ModelKind kind() const { return kind_of(config); }

  ModelGraph() = default;
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;
  ModelGraph(const ModelGraph&) = delete;
  ModelGraph& operator=(const ModelGraph&) = delete;
};

template <typename T>
struct MultiScaleOutput {
  std::vector<Tensor<T>> per_scale;  // one [1,H,W] prediction per scale
  Tensor<T> fused;                   // [1,H,W]
};

template <typename T>
ModelGraph<T> build_fclstm(const FclstmConfig& config, std::uint64_t init_seed);

// Baselines with their default widths (ConvLSTM 16/32/64, LSTM and MLP 256).
template <typename T>
ModelGraph<T> build_baseline(ModelKind kind, std::size_t height, std::size_t width,
                             std::size_t input_frames, std::uint64_t init_seed);

template <typename T>
ModelGraph<T> build_model(const ModelConfig& config, std::uint64_t init_seed);

template <typename T>
MultiScaleOutput<T> forward_fclstm(const ModelGraph<T>& model, const Tensor<T>& frames,
                                   nn::Mode mode = nn::Mode::eval);

template <typename T>
Tensor<T> forward_baseline(const ModelGraph<T>& model, const Tensor<T>& frames,
                           nn::Mode mode = nn::Mode::eval);

// Next-frame prediction for any model kind (the fused output for F-CLSTM).
template <typename T>
Tensor<T> predict(const ModelGraph<T>& model, const Tensor<T>& frames,
                  nn::Mode mode = nn::Mode::eval);

// Number of trainable scalars (batch-norm running statistics excluded).
template <typename T>
std::size_t param_count(const ModelGraph<T>& model);

}  // namespace nowcast::models
