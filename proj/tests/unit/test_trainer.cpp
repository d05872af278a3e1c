#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "nowcast/autodiff.hpp"
#include "nowcast/datasets/container.hpp"
#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/datasets/pnm.hpp"
#include "nowcast/trainer/checkpoint.hpp"
#include "nowcast/trainer/fit.hpp"
#include "nowcast/trainer/init.hpp"
#include "nowcast/trainer/nadam.hpp"
#include "oracles/oracles.hpp"
#include "support/helpers.hpp"

using namespace nowcast;
using namespace nowcast::trainer;
using testing_support::TempDir;
using testing_support::small_mnist;
using testing_support::tiny_clstm;
using testing_support::tiny_fclstm;

namespace {

ParameterTable<double> scalar_table(double value) {
  ParameterTable<double> t;
  t.add("theta", {1}, ParamRole::weight, 1).mutable_data()[0] = value;
  return t;
}

void set_grad(const Tensor<double>& t, double g) { t.mutable_grad()[0] = g; }

TrainConfig tiny_train(objectives::LossKind loss, std::uint64_t seed) {
  TrainConfig c;
  c.model = tiny_fclstm(16, 3);
  c.loss = loss;
  c.epochs = 2;
  c.batch_size = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Nadam, ScalarMatchesStandaloneOracle) {
  auto table = scalar_table(0.7);
  auto state = OptimState<double>::zeros(table);
  oracle::ScalarNadam ref;
  double theta = 0.7;
  for (int k = 0; k < 100; ++k) {
    const double g = std::sin(0.3 * k) + 0.5 * std::cos(0.07 * k * k);
    table.zero_grad();
    set_grad(table.entries()[0].tensor, g);
    nadam_step(table, state);
    theta = ref.step(theta, g);
    ASSERT_NEAR(table.entries()[0].tensor.at(0), theta, 1e-10) << "step " << k + 1;
  }
  EXPECT_EQ(state.step, 100u);
}

TEST(Nadam, FirstStepSize) {
  // m_hat = g, v_hat = g^2: the update is lr * (b1 + (1-b1)/(1-b1)) = 0.0038 for g > 0.
  auto table = scalar_table(1.0);
  auto state = OptimState<double>::zeros(table);
  set_grad(table.entries()[0].tensor, 3.0);
  nadam_step(table, state);
  EXPECT_NEAR(1.0 - table.entries()[0].tensor.at(0), 0.0038, 1e-9);
}

TEST(Nadam, ZeroLearningRateLeavesParametersUnchanged) {
  auto table = scalar_table(2.5);
  NadamConfig hp;
  hp.lr = 0;
  auto state = OptimState<double>::zeros(table, hp);
  for (int k = 0; k < 5; ++k) {
    set_grad(table.entries()[0].tensor, 1.0 + k);
    nadam_step(table, state);
  }
  EXPECT_EQ(table.entries()[0].tensor.at(0), 2.5);
  EXPECT_NE(state.m[0][0], 0.0);
}

TEST(Nadam, SkipsBuffersAndRejectsNonFiniteGradients) {
  ParameterTable<double> t;
  t.add("w", {2}, ParamRole::weight, 1);
  auto buf = t.add("bn.running_mean", {2}, ParamRole::bn_running_mean);
  auto state = OptimState<double>::zeros(t);
  EXPECT_EQ(state.names, (std::vector<std::string>{"w"}));
  t.entries()[0].tensor.mutable_grad()[0] = 1.0;
  t.entries()[0].tensor.mutable_grad()[1] = std::nan("");
  EXPECT_THROW(nadam_step(t, state), NumericError);
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(t.entries()[0].tensor.at(0), 0.0);
  t.zero_grad();
  nadam_step(t, state);  // zero gradient: no movement
  EXPECT_EQ(t.entries()[0].tensor.at(0), 0.0);
  EXPECT_EQ(buf.at(0), 0.0);
  NadamConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Init, UniformBoundsAndDeterminism) {
  ParameterTable<double> a;
  a.add("w", {64, 25}, ParamRole::weight, 25);
  a.add("b", {64}, ParamRole::bias);
  a.add("g", {4}, ParamRole::bn_gamma);
  a.add("v", {4}, ParamRole::bn_running_var);
  init_uniform(a, 9);
  double lo = 1, hi = -1;
  for (double v : a.entries()[0].tensor.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -0.2);
  EXPECT_LE(hi, 0.2);
  EXPECT_LT(lo, -0.15);  // the full range is used
  EXPECT_GT(hi, 0.15);
  EXPECT_EQ(a.entries()[2].tensor.at(0), 1.0);
  EXPECT_EQ(a.entries()[3].tensor.at(0), 1.0);
  const auto first = a.entries()[0].tensor.at(0);
  init_uniform(a, 9);
  EXPECT_EQ(a.entries()[0].tensor.at(0), first);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("ckpt");
  auto m = models::build_model<float>(tiny_fclstm(), 4);
  auto state = OptimState<float>::zeros(m.params);
  state.step = 17;
  state.m[0][0] = 0.25f;
  state.v[1][0] = 1e-7f;
  const nlohmann::json extra{{"train", {{"loss", "mse"}, {"batch_size", 2}, {"seed", 1}}}};
  save_checkpoint(m, state, dir.file("a.sckp"), extra);
  const auto bytes = datasets::read_file(dir.file("a.sckp"));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SCKP");
  const auto ck = load_checkpoint<float>(dir.file("a.sckp"));
  EXPECT_EQ(ck.state.step, 17u);
  EXPECT_EQ(ck.state.m, state.m);
  EXPECT_EQ(ck.state.v, state.v);
  EXPECT_EQ(ck.header["train"]["batch_size"], 2);
  ASSERT_EQ(ck.model.params.size(), m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& a = m.params.entries()[i].tensor.data();
    const auto& b = ck.model.params.entries()[i].tensor.data();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  EXPECT_EQ(encode_checkpoint(ck.model, ck.state, extra), bytes);
}

TEST(Checkpoint, RejectsCorruptionAndArchitectureMismatch) {
  auto m = models::build_model<float>(tiny_clstm(), 4);
  const auto bytes = encode_checkpoint(m, OptimState<float>::zeros(m.params));
  auto bad = bytes;
  bad[0] = 'Z';
  try {
    decode_checkpoint<float>(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint<float>(truncated), FormatError);

  auto other = models::build_model<float>(tiny_fclstm(), 4);
  std::vector<NamedTensor> stored;
  for (const auto& e : m.params.entries())
    stored.push_back({e.name, e.tensor.shape(), std::vector<float>(e.tensor.data().begin(), e.tensor.data().end())});
  EXPECT_THROW(load_parameters(other.params, stored), std::invalid_argument);
  stored[0].shape = {1};
  stored[0].values = {0.f};
  try {
    load_parameters(m.params, stored);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find(m.params.entries()[0].name), std::string::npos);
  }
}

TEST(Trainer, BestCheckpointNaming) {
  EXPECT_EQ(best_checkpoint_path("run.sckp"), "run.best.sckp");
  EXPECT_EQ(best_checkpoint_path("dir.v1/run"), "dir.v1/run.best");
}

TEST(Trainer, RunsAreDeterministic) {
  const auto data = small_mnist(4, 16, 4, 1);
  auto a = Trainer<float>(tiny_train(objectives::LossKind::forecaster, 3));
  auto b = Trainer<float>(tiny_train(objectives::LossKind::forecaster, 3));
  const auto la = a.fit(data, {});
  const auto lb = b.fit(data, {});
  ASSERT_EQ(la.size(), 2u);
  EXPECT_EQ(la.back().train_loss, lb.back().train_loss);
  EXPECT_EQ(a.step_losses(), b.step_losses());
  EXPECT_EQ(a.state().step, 4u);
  EXPECT_EQ(encode_checkpoint(a.model(), a.state()), encode_checkpoint(b.model(), b.state()));
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  TempDir dir("resume");
  const auto train = small_mnist(5, 16, 4, 2);
  const auto eval = small_mnist(2, 16, 4, 3);

  auto full_cfg = tiny_train(objectives::LossKind::mse, 4);
  full_cfg.epochs = 3;
  Trainer<float> full(full_cfg);
  full.fit(train, eval);

  auto half_cfg = full_cfg;
  half_cfg.epochs = 1;
  half_cfg.checkpoint_path = dir.file("run.sckp");
  Trainer<float>(half_cfg).fit(train, eval);
  EXPECT_TRUE(std::filesystem::exists(dir.file("run.best.sckp")));

  auto rest_cfg = full_cfg;
  rest_cfg.checkpoint_path = dir.file("run.sckp");
  auto resumed = Trainer<float>::resume(dir.file("run.sckp"), rest_cfg);
  EXPECT_EQ(resumed.epochs_done(), 1u);
  const auto logs = resumed.fit(train, eval);
  ASSERT_EQ(logs.size(), 2u);
  EXPECT_EQ(logs.back().epoch, 3u);
  EXPECT_EQ(encode_checkpoint(resumed.model(), resumed.state()), encode_checkpoint(full.model(), full.state()));
}

TEST(Trainer, EvaluationCadenceAndLogs) {
  const auto train = small_mnist(4, 16, 4, 5);
  const auto eval = small_mnist(2, 16, 4, 6);
  auto cfg = tiny_train(objectives::LossKind::forecaster, 1);
  cfg.epochs = 3;
  cfg.eval_every = 2;
  Trainer<float> t(cfg);
  std::vector<std::size_t> seen;
  const auto logs = t.fit(train, eval, [&](const EpochLog& l) { seen.push_back(l.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_FALSE(logs[0].eval.has_value());
  EXPECT_TRUE(logs[1].eval.has_value());
  EXPECT_TRUE(logs[2].eval.has_value());  // final epoch always evaluated
  EXPECT_TRUE(logs[1].best);
  const auto j = logs[1].to_json();
  for (const char* k : {"epoch", "step", "train_loss", "fused_mse", "fused_forecaster_sum", "fused_forecaster_mean",
                        "eval", "best"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_FALSE(logs[0].to_json().contains("eval"));
  EXPECT_NEAR(logs[0].fused_forecaster_sum / 256.0, logs[0].fused_forecaster_mean, 1e-6 * logs[0].fused_forecaster_mean);
}

TEST(Trainer, DatasetLossDoesNotTouchRunningStatistics) {
  const auto data = small_mnist(3, 16, 4, 7);
  Trainer<double> t(tiny_train(objectives::LossKind::mse, 2));
  const auto before = encode_checkpoint(t.model(), t.state());
  const double a = dataset_loss(t.model(), data, objectives::LossKind::mse);
  const double b = dataset_loss(t.model(), data, objectives::LossKind::mse);
  EXPECT_EQ(a, b);
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(encode_checkpoint(t.model(), t.state()), before);
  EXPECT_THROW(dataset_loss(t.model(), {}, objectives::LossKind::mse), std::invalid_argument);
}

TEST(Trainer, TrainingReducesLossOnATinySet) {
  const auto data = small_mnist(2, 16, 4, 8);
  auto cfg = tiny_train(objectives::LossKind::mse, 5);
  cfg.epochs = 30;
  Trainer<float> t(cfg);
  const double before = dataset_loss(t.model(), data, cfg.loss);
  t.fit(data, {});
  EXPECT_LT(dataset_loss(t.model(), data, cfg.loss), 0.5 * before);
}

TEST(Trainer, RejectsBadInputs) {
  auto cfg = tiny_train(objectives::LossKind::mse, 1);
  cfg.batch_size = 0;
  EXPECT_THROW(Trainer<float>{cfg}, std::invalid_argument);
  Trainer<float> t(tiny_train(objectives::LossKind::mse, 1));
  EXPECT_THROW(t.train_epoch({}, {}), std::invalid_argument);
  EXPECT_THROW(t.train_epoch(datasets::Dataset(2, datasets::SequenceSample(4, 8, 8)), {}), ShapeError);
}
