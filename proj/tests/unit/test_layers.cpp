#include <gtest/gtest.h>

#include <cmath>

#include "nowcast/autodiff.hpp"
#include "nowcast/gradcheck.hpp"
#include "nowcast/nn/layers.hpp"
#include "oracles/oracles.hpp"
#include "support/helpers.hpp"

using namespace nowcast;
using namespace nowcast::nn;
using testing_support::random_tensor;
using testing_support::to_vector;

namespace {

constexpr double kOpTol = 1e-4;

Tensor<double> weighted_sum(const Tensor<double>& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.25 + 0.13 * static_cast<double>(i % 11);
  return sum(mul(t, Tensor<double>(t.shape(), w)));
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  return s;
}

}  // namespace

TEST(ConvExtent, Formulas) {
  EXPECT_EQ(conv_output_extent(5, 3, 1, 1), 5u);
  EXPECT_EQ(conv_output_extent(6, 2, 2, 0), 3u);
  EXPECT_THROW(conv_output_extent(6, 3, 2, 0), ShapeError);
  EXPECT_EQ(conv_transpose_output_extent(3, 3, 2, 1), 5u);
  EXPECT_EQ(conv_transpose_output_extent(4, 3, 1, 1), 4u);
}

struct ConvCase {
  std::size_t c, h, w, o, k, stride, pad;
};

class ConvAgainstOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvAgainstOracle, ForwardMatchesDirectLoops) {
  const auto p = GetParam();
  auto x = random_tensor({p.c, p.h, p.w}, 1);
  auto w = random_tensor({p.o, p.c, p.k, p.k}, 2);
  auto b = random_tensor({p.o}, 3);
  const auto y = conv2d(x, Conv2dParams<double>{w, b, p.stride, p.pad});
  const auto ref = oracle::conv2d(to_vector(x), p.c, p.h, p.w, to_vector(w), p.o, p.k, p.stride, p.pad,
                                  to_vector(b));
  ASSERT_EQ(y.numel(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-12);
}

TEST_P(ConvAgainstOracle, TransposeForwardMatchesScatterLoops) {
  const auto p = GetParam();
  auto x = random_tensor({p.c, p.h, p.w}, 4);
  auto w = random_tensor({p.c, p.o, p.k, p.k}, 5);
  const auto y = conv_transpose2d(x, Conv2dParams<double>{w, {}, p.stride, p.pad});
  const auto ref = oracle::conv_transpose2d(to_vector(x), p.c, p.h, p.w, to_vector(w), p.o, p.k, p.stride, p.pad);
  ASSERT_EQ(y.numel(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-12);
}

TEST_P(ConvAgainstOracle, TransposeIsTheAdjoint) {
  const auto p = GetParam();
  auto w = random_tensor({p.o, p.c, p.k, p.k}, 6);
  auto x = random_tensor({p.c, p.h, p.w}, 7);
  const Conv2dParams<double> params{w, {}, p.stride, p.pad};
  const auto y = conv2d(x, params);
  auto u = random_tensor(y.shape(), 8);
  // <conv(x), u> == <x, conv^T(u)> with the same weight tensor.
  const auto back = conv_transpose2d(u, params);
  if (back.shape() != x.shape()) GTEST_SKIP() << "stride drops input rows";
  EXPECT_NEAR(dot(y, u), dot(x, back), 1e-10);
}

TEST_P(ConvAgainstOracle, GradientsMatchFiniteDifferences) {
  const auto p = GetParam();
  auto x = random_tensor({2, p.c, p.h, p.w}, 9);
  auto w = random_tensor({p.o, p.c, p.k, p.k}, 10);
  auto b = random_tensor({p.o}, 11);
  EXPECT_LT(fd_check([&] { return weighted_sum(conv2d(x, Conv2dParams<double>{w, b, p.stride, p.pad})); },
                     {x, w, b}),
            kOpTol);
  auto xt = random_tensor({2, p.o, p.h, p.w}, 12);
  auto wt = random_tensor({p.o, p.c, p.k, p.k}, 13);
  auto bt = random_tensor({p.c}, 14);
  EXPECT_LT(fd_check([&] {
              return weighted_sum(conv_transpose2d(xt, Conv2dParams<double>{wt, bt, p.stride, p.pad}));
            },
                     {xt, wt, bt}),
            kOpTol);
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvAgainstOracle,
                         ::testing::Values(ConvCase{1, 5, 5, 2, 3, 1, 1}, ConvCase{3, 6, 7, 4, 3, 1, 1},
                                           ConvCase{2, 6, 6, 3, 1, 1, 0}, ConvCase{2, 7, 7, 2, 3, 2, 1},
                                           ConvCase{2, 8, 8, 3, 5, 1, 2}, ConvCase{1, 4, 6, 2, 2, 2, 0}));

TEST(Conv, BatchedEqualsPerImage) {
  auto x = random_tensor({3, 2, 5, 5}, 20);
  auto w = random_tensor({4, 2, 3, 3}, 21);
  const Conv2dParams<double> p{w, {}, 1, 1};
  const auto y = conv2d(x, p);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto yn = conv2d(select(x, n), p);
    for (std::size_t i = 0; i < yn.numel(); ++i) EXPECT_EQ(y.at(n * yn.numel() + i), yn.at(i));
  }
}

TEST(Conv, RejectsMismatchedChannels) {
  auto x = random_tensor({3, 5, 5}, 22);
  auto w = random_tensor({4, 2, 3, 3}, 23);
  EXPECT_THROW(conv2d(x, Conv2dParams<double>{w, {}, 1, 1}), ShapeError);
  EXPECT_THROW(conv2d(x, Conv2dParams<double>{random_tensor({4, 3, 3, 3}, 24), random_tensor({3}, 25), 1, 1}),
               ShapeError);
}

TEST(Pooling, MaxpoolValuesAndFirstTieWins) {
  Tensor<double> x({1, 2, 4}, std::vector<double>{1, 5, 2, 2, 5, 3, 2, 2});
  const auto r = maxpool2d(x, 2);
  EXPECT_EQ(r.values.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(r.values.at(0), 5.0);
  EXPECT_EQ(r.argmax[0], 1u);  // (0,1) precedes (1,0)
  EXPECT_EQ(r.argmax[1], 2u);
  EXPECT_THROW(maxpool2d(random_tensor({1, 3, 4}, 1), 2), ShapeError);
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  auto x = random_tensor({2, 2, 4, 6}, 30);
  EXPECT_LT(fd_check([&] { return weighted_sum(maxpool2d(x, 2).values); }, {x}), kOpTol);
  auto u = random_tensor({2, 3, 3}, 31);
  EXPECT_LT(fd_check([&] { return weighted_sum(upsample_nearest(u, 2)); }, {u}), kOpTol);
}

TEST(Pooling, UpsampleRepeatsPixels) {
  Tensor<double> x({1, 1, 2}, std::vector<double>{1, 2});
  const auto y = upsample_nearest(x, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 4}));
  EXPECT_EQ(to_vector(y), (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2}));
}

TEST(BatchNorm, TrainNormalizesPerChannel) {
  auto x = random_tensor({3, 2, 4, 4}, 40, -3, 5);
  auto p = BatchNormParams<double>::identity(2);
  const auto y = batchnorm2d(x, p, Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < 16; ++i) m += y.at((n * 2 + c) * 16 + i);
    m /= 48;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < 16; ++i) v += std::pow(y.at((n * 2 + c) * 16 + i) - m, 2);
    v /= 48;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatisticsUpdateOnlyInTrainMode) {
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 6});
  auto p = BatchNormParams<double>::identity(1);
  batchnorm2d(x, p, Mode::probe);
  EXPECT_EQ(p.running_mean.at(0), 0.0);
  batchnorm2d(x, p, Mode::eval);
  EXPECT_EQ(p.running_var.at(0), 1.0);
  batchnorm2d(x, p, Mode::train);
  EXPECT_NEAR(p.running_mean.at(0), 0.1 * 3.0, 1e-12);
  // unbiased variance of {1,2,3,6} is 14/3
  EXPECT_NEAR(p.running_var.at(0), 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
  Tensor<double> x({1, 2, 2}, std::vector<double>{4, 4, 4, 4});
  auto p = BatchNormParams<double>::identity(1);
  p.running_mean.mutable_data()[0] = 2.0;
  p.running_var.mutable_data()[0] = 4.0 - 1e-5;
  EXPECT_NEAR(batchnorm2d(x, p, Mode::eval).at(0), 1.0, 1e-12);
  EXPECT_THROW(batchnorm2d(Tensor<double>({1, 1, 1}, 1.0), p, Mode::train), ShapeError);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  auto x = random_tensor({2, 3, 3, 3}, 41);
  auto p = BatchNormParams<double>::identity(3);
  p.gamma = random_tensor({3}, 42, 0.5, 1.5);
  p.beta = random_tensor({3}, 43);
  p.running_var = random_tensor({3}, 44, 0.5, 2.0);
  for (auto mode : {Mode::probe, Mode::eval}) {
    EXPECT_LT(fd_check([&] { return weighted_sum(batchnorm2d(x, p, mode)); }, {x, p.gamma, p.beta}), kOpTol);
  }
}

TEST(Linear, ForwardAndGradients) {
  auto x = random_tensor({4}, 50);
  auto w = random_tensor({3, 4}, 51);
  auto b = random_tensor({3}, 52);
  const auto y = linear(x, w, b);
  for (std::size_t o = 0; o < 3; ++o) {
    double acc = b.at(o);
    for (std::size_t i = 0; i < 4; ++i) acc += w.at(o * 4 + i) * x.at(i);
    EXPECT_NEAR(y.at(o), acc, 1e-14);
  }
  EXPECT_LT(fd_check([&] { return weighted_sum(linear(x, w, b)); }, {x, w, b}), kOpTol);
  EXPECT_THROW(linear(random_tensor({5}, 53), w, b), ShapeError);
}

TEST(Lstm, CellMatchesHandComputation) {
  // One hidden unit, one input; gates i,f,o,g.
  Tensor<double> x({1}, std::vector<double>{0.5});
  LstmParams<double> p{Tensor<double>({4, 1}, std::vector<double>{1, 2, 3, 4}),
                       Tensor<double>({4, 1}, std::vector<double>{0.1, 0.2, 0.3, 0.4}),
                       Tensor<double>({4}, std::vector<double>{0, 0, 0, 0})};
  LstmState<double> s{Tensor<double>({1}, std::vector<double>{1.0}), Tensor<double>({1}, std::vector<double>{2.0})};
  const auto out = lstm_cell(x, s, p);
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  const double i = sig(0.5 + 0.1), f = sig(1.0 + 0.2), o = sig(1.5 + 0.3), g = std::tanh(2.0 + 0.4);
  const double c = f * 2.0 + i * g;
  EXPECT_NEAR(out.c.at(0), c, 1e-14);
  EXPECT_NEAR(out.h.at(0), o * std::tanh(c), 1e-14);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  auto x = random_tensor({3}, 60);
  LstmParams<double> p{random_tensor({8, 3}, 61), random_tensor({8, 2}, 62), random_tensor({8}, 63)};
  auto h0 = random_tensor({2}, 64);
  auto c0 = random_tensor({2}, 65);
  EXPECT_LT(fd_check(
                [&] {
                  auto s1 = lstm_cell(x, {h0, c0}, p);
                  auto s2 = lstm_cell(x, s1, p);
                  return add(weighted_sum(s2.h), weighted_sum(s2.c));
                },
                {x, p.w_x, p.w_h, p.bias, h0, c0}),
            kOpTol);
}

class ConvLstmGradient : public ::testing::TestWithParam<bool> {};

TEST_P(ConvLstmGradient, CellAndSequenceMatchFiniteDifferences) {
  const bool peephole = GetParam();
  ConvLstmParams<double> p;
  p.w_x = random_tensor({8, 1, 3, 3}, 70, -0.5, 0.5);
  p.w_h = random_tensor({8, 2, 3, 3}, 71, -0.5, 0.5);
  p.bias = random_tensor({8}, 72);
  if (peephole) {
    p.peep_i = random_tensor({2, 4, 4}, 73);
    p.peep_f = random_tensor({2, 4, 4}, 74);
    p.peep_o = random_tensor({2, 4, 4}, 75);
  }
  auto x = random_tensor({3, 1, 4, 4}, 76);
  std::vector<Tensor<double>> wrt{x, p.w_x, p.w_h, p.bias};
  if (peephole) wrt.insert(wrt.end(), {p.peep_i, p.peep_f, p.peep_o});
  EXPECT_LT(fd_check(
                [&] {
                  const auto hs = convlstm_sequence(x, p);
                  return add(weighted_sum(hs.back()), weighted_sum(hs.front()));
                },
                wrt),
            kOpTol);

  // The sequence helper equals stepping the cell by hand.
  auto state = ConvLstmState<double>::zeros(2, 4, 4);
  const auto hs = convlstm_sequence(x, p);
  for (std::size_t t = 0; t < 3; ++t) {
    state = convlstm_cell(select(x, t), state, p);
    for (std::size_t i = 0; i < state.h.numel(); ++i) EXPECT_NEAR(hs[t].at(i), state.h.at(i), 1e-13);
  }
}

INSTANTIATE_TEST_SUITE_P(Peephole, ConvLstmGradient, ::testing::Bool());

TEST(ConvLstm, RejectsEvenKernelsAndBadShapes) {
  ConvLstmParams<double> p;
  p.w_x = random_tensor({8, 1, 2, 2}, 80);
  p.w_h = random_tensor({8, 2, 2, 2}, 81);
  p.bias = random_tensor({8}, 82);
  EXPECT_THROW(convlstm_sequence(random_tensor({2, 1, 4, 4}, 83), p), ShapeError);
  p.w_x = random_tensor({8, 1, 3, 3}, 84);
  p.w_h = random_tensor({8, 2, 3, 3}, 85);
  EXPECT_THROW(convlstm_sequence(random_tensor({2, 3, 4, 4}, 86), p), ShapeError);
}
