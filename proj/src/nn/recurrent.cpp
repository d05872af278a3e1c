#include <string>
#include <vector>

#include "nowcast/autodiff.hpp"
#include "nowcast/nn/layers.hpp"

namespace nowcast::nn {

namespace {

template <typename T>
struct Gates {
  Tensor<T> i, f, o, g;
};

// Splits stacked pre-activations [4*D, ...] and applies the gate
// nonlinearities (sigmoid for i, f, o; tanh for g).
template <typename T>
Gates<T> split_gates(const Tensor<T>& pre, std::size_t d) {
  const auto sig = sigmoid(narrow(pre, 0, 3 * d));
  return {narrow(sig, 0, d), narrow(sig, d, d), narrow(sig, 2 * d, d), tanh(narrow(pre, 3 * d, d))};
}

template <typename T>
ConvLstmState<T> convlstm_step(const Tensor<T>& x_gates, const ConvLstmState<T>& state,
                               const ConvLstmParams<T>& p) {
  const std::size_t d = p.hidden();
  const Conv2dParams<T> recurrent{p.w_h, Tensor<T>(), 1, p.kernel() / 2};
  const auto pre = add(x_gates, conv2d(state.h, recurrent));
  if (!p.has_peephole()) {
    const auto gates = split_gates(pre, d);
    const auto c = add(mul(gates.f, state.c), mul(gates.i, gates.g));
    return {mul(gates.o, tanh(c)), c};
  }
  const auto i = sigmoid(add(narrow(pre, 0, d), mul(p.peep_i, state.c)));
  const auto f = sigmoid(add(narrow(pre, d, d), mul(p.peep_f, state.c)));
  const auto g = tanh(narrow(pre, 3 * d, d));
  const auto c = add(mul(f, state.c), mul(i, g));
  const auto o = sigmoid(add(narrow(pre, 2 * d, d), mul(p.peep_o, c)));
  return {mul(o, tanh(c)), c};
}

template <typename T>
void check_convlstm(const ConvLstmParams<T>& p, std::size_t in_channels) {
  if (!p.w_x.defined() || !p.w_h.defined() || p.w_x.rank() != 4 || p.w_h.rank() != 4) {
    throw ShapeError("convlstm: kernels must be 4-d");
  }
  const std::size_t d = p.w_h.dim(1);
  const std::size_t k = p.w_h.dim(3);
  if (p.w_h.shape() != Shape{4 * d, d, k, k} || p.w_x.shape() != Shape{4 * d, in_channels, k, k} ||
      k % 2 == 0) {
    throw ShapeError("convlstm: kernels " + shape_str(p.w_x.shape()) + " / " +
                     shape_str(p.w_h.shape()) + " inconsistent with " + std::to_string(in_channels) +
                     " input channels and an odd square kernel");
  }
  if (p.bias.defined() && p.bias.shape() != Shape{4 * d}) {
    throw ShapeError("convlstm: bias must be [4*hidden], got " + shape_str(p.bias.shape()));
  }
}

}  // namespace

template <typename T>
LstmState<T> LstmState<T>::zeros(std::size_t hidden) {
  return {Tensor<T>(Shape{hidden}), Tensor<T>(Shape{hidden})};
}

template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& state, const LstmParams<T>& p) {
  const std::size_t d = p.w_h.dim(1);
  if (p.w_h.shape() != Shape{4 * d, d} || p.w_x.rank() != 2 || p.w_x.dim(0) != 4 * d ||
      state.h.shape() != Shape{d} || state.c.shape() != Shape{d}) {
    throw ShapeError("lstm_cell: state " + shape_str(state.h.shape()) + " / kernels " +
                     shape_str(p.w_x.shape()) + ", " + shape_str(p.w_h.shape()) + " inconsistent");
  }
  const auto pre = add(linear(x, p.w_x, p.bias), linear(state.h, p.w_h, Tensor<T>()));
  const auto gates = split_gates(pre, d);
  const auto c = add(mul(gates.f, state.c), mul(gates.i, gates.g));
  return {mul(gates.o, tanh(c)), c};
}

template <typename T>
ConvLstmState<T> ConvLstmState<T>::zeros(std::size_t hidden, std::size_t height, std::size_t width) {
  return {Tensor<T>(Shape{hidden, height, width}), Tensor<T>(Shape{hidden, height, width})};
}

template <typename T>
ConvLstmState<T> convlstm_cell(const Tensor<T>& x, const ConvLstmState<T>& state,
                               const ConvLstmParams<T>& p) {
  if (x.rank() != 3) throw ShapeError("convlstm_cell: input must be [C,H,W], got " + shape_str(x.shape()));
  check_convlstm(p, x.dim(0));
  const Shape expected{p.hidden(), x.dim(1), x.dim(2)};
  if (state.h.shape() != expected || state.c.shape() != expected) {
    throw ShapeError("convlstm_cell: input " + shape_str(x.shape()) + " and state " +
                     shape_str(state.h.shape()) + " disagree");
  }
  const Conv2dParams<T> input{p.w_x, p.bias, 1, p.kernel() / 2};
  return convlstm_step(conv2d(x, input), state, p);
}

template <typename T>
std::vector<Tensor<T>> convlstm_sequence(const Tensor<T>& x, const ConvLstmParams<T>& p) {
  if (x.rank() != 4) throw ShapeError("convlstm_sequence: input must be [T,C,H,W], got " + shape_str(x.shape()));
  check_convlstm(p, x.dim(1));
  const Conv2dParams<T> input{p.w_x, p.bias, 1, p.kernel() / 2};
  const auto x_gates = conv2d(x, input);
  auto state = ConvLstmState<T>::zeros(p.hidden(), x.dim(2), x.dim(3));
  std::vector<Tensor<T>> hidden;
  hidden.reserve(x.dim(0));
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    state = convlstm_step(select(x_gates, t), state, p);
    hidden.push_back(state.h);
  }
  return hidden;
}

#define NOWCAST_INSTANTIATE(T)                                                                   \
  template struct LstmState<T>;                                                                  \
  template struct ConvLstmState<T>;                                                              \
  template LstmState<T> lstm_cell(const Tensor<T>&, const LstmState<T>&, const LstmParams<T>&);  \
  template ConvLstmState<T> convlstm_cell(const Tensor<T>&, const ConvLstmState<T>&,             \
                                          const ConvLstmParams<T>&);                             \
  template std::vector<Tensor<T>> convlstm_sequence(const Tensor<T>&, const ConvLstmParams<T>&);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::nn
