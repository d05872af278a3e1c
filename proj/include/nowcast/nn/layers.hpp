#pragma once

// Layer vocabulary: frame-wise convolution and its transpose, pooling,
// upsampling, batch normalization, fully connected, LSTM and ConvLSTM cells.
//
// Image operands are [C,H,W]; most spatial ops also accept a leading batch
// axis [N,C,H,W] and treat each of the N images independently (a sequence
// [T,C,H,W] is processed frame by frame this way).

#include <cstddef>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::nn {

// train normalizes with batch statistics and updates the running ones;
// probe normalizes the same way but leaves the running statistics alone.
enum class Mode { train, eval, probe };

// weight: [Cout,Cin,k,k] for conv2d. For conv_transpose2d the same tensor
// layout is read as [Cin_t,Cout_t,k,k], i.e. the transpose of the conv2d it
// is the adjoint of. bias is optional (undefined tensor = no bias).
template <typename T>
struct Conv2dParams {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// (extent + 2*padding - kernel)/stride + 1; throws ShapeError if not integral.
std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding);
// (extent-1)*stride - 2*padding + kernel; throws ShapeError if not positive.
std::size_t conv_transpose_output_extent(std::size_t extent, std::size_t kernel,
                                         std::size_t stride, std::size_t padding);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p);

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Conv2dParams<T>& p);

template <typename T>
struct PoolResult {
  Tensor<T> values;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Non-overlapping window x window max pooling. Ties resolve to the first
// element in row-major order within the window.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& x, std::size_t window = 2);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor = 2);

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;         // [C]
  Tensor<T> beta;          // [C]
  Tensor<T> running_mean;  // [C], not trainable
  Tensor<T> running_var;   // [C], not trainable
  T eps = T(1e-5);
  T momentum = T(0.1);

  static BatchNormParams identity(std::size_t channels);
};

// Train mode normalizes with the statistics of x over every axis but the
// channel axis and folds them into the running estimates (unbiased variance).
// Eval mode uses the running estimates and leaves them untouched.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const BatchNormParams<T>& p, Mode mode);

// x: [Din], weight: [Dout,Din], bias: [Dout] or undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Gates are stacked in the order input, forget, output, candidate.
template <typename T>
struct LstmParams {
  Tensor<T> w_x;   // [4*Dh, Din]
  Tensor<T> w_h;   // [4*Dh, Dh]
  Tensor<T> bias;  // [4*Dh]
};

template <typename T>
struct LstmState {
  Tensor<T> h;  // [Dh]
  Tensor<T> c;  // [Dh]

  static LstmState zeros(std::size_t hidden);
};

template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& state, const LstmParams<T>& p);

// Convolutional LSTM with fused gate kernels (order i, f, o, g). Peephole
// weights are per-element [Chid,H,W] and only used when all three are defined.
template <typename T>
struct ConvLstmParams {
  Tensor<T> w_x;   // [4*Chid, Cin, k, k]
  Tensor<T> w_h;   // [4*Chid, Chid, k, k]
  Tensor<T> bias;  // [4*Chid]
  Tensor<T> peep_i;
  Tensor<T> peep_f;
  Tensor<T> peep_o;

  std::size_t hidden() const { return w_h.dim(1); }
  std::size_t kernel() const { return w_h.dim(3); }
  bool has_peephole() const { return peep_i.defined() && peep_f.defined() && peep_o.defined(); }
};

template <typename T>
struct ConvLstmState {
  Tensor<T> h;  // [Chid,H,W]
  Tensor<T> c;  // [Chid,H,W]

  static ConvLstmState zeros(std::size_t hidden, std::size_t height, std::size_t width);
};

template <typename T>
ConvLstmState<T> convlstm_cell(const Tensor<T>& x, const ConvLstmState<T>& state,
                               const ConvLstmParams<T>& p);

// Rolls the cell over x: [T,Cin,H,W] from the zero state and returns the
// hidden map of every step. The input-to-state convolution runs once over
// all frames.
template <typename T>
std::vector<Tensor<T>> convlstm_sequence(const Tensor<T>& x, const ConvLstmParams<T>& p);

}  // namespace nowcast::nn
