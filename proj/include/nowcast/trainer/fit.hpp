#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/datasets/sample.hpp"
#include "nowcast/model_config.hpp"
#include "nowcast/models.hpp"
#include "nowcast/objectives.hpp"
#include "nowcast/trainer/checkpoint.hpp"
#include "nowcast/trainer/nadam.hpp"

namespace nowcast::trainer {

struct TrainConfig {
  models::ModelConfig model;
  objectives::LossKind loss = objectives::LossKind::mse;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  NadamConfig optimizer;
  // Where the last-epoch checkpoint goes; the best one goes to
  // best_checkpoint_path(checkpoint_path). Empty disables checkpoints.
  std::string checkpoint_path;
  std::size_t eval_every = 1;  // epochs; 0 = only after the final epoch
  double eccr_tau = objectives::kDefaultEccrTau;

  void validate() const;
  nlohmann::json to_json() const;
};

// "run.sckp" -> "run.best.sckp"
std::string best_checkpoint_path(const std::string& path);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::uint64_t step = 0;
  double train_loss = 0;  // mean optimized objective over the epoch's samples
  // Fused prediction against the target, averaged over the epoch's samples:
  double fused_mse = 0;
  double fused_forecaster_sum = 0;   // raw weighted sum
  double fused_forecaster_mean = 0;  // the same per pixel
  std::optional<objectives::MetricsReport> eval;
  bool best = false;

  nlohmann::json to_json() const;
};

// Mean optimized objective over `data` with batch statistics but without
// touching running statistics or recording gradients.
template <typename T>
double dataset_loss(const models::ModelGraph<T>& model, const datasets::Dataset& data,
                    objectives::LossKind loss);

template <typename T>
class Trainer {
 public:
  // Fresh model initialized from cfg.seed.
  explicit Trainer(TrainConfig cfg);
  // Continues the run saved in a checkpoint written by this class. The
  // stored model and optimizer state replace what cfg would build; epochs
  // and checkpoint paths are taken from cfg.
  static Trainer resume(const std::string& checkpoint, TrainConfig cfg);

  // Shuffles with derive_seed(seed, epoch), then per minibatch: one forward
  // and backward per sample with the loss divided by the batch size, one
  // optimizer step, gradient reset. Throws NumericError on a non-finite loss.
  EpochLog train_epoch(const datasets::Dataset& train, const datasets::Dataset& eval);

  // Runs the remaining epochs; on_epoch sees each log as it is produced.
  std::vector<EpochLog> fit(const datasets::Dataset& train, const datasets::Dataset& eval,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

  const models::ModelGraph<T>& model() const { return model_; }
  const OptimState<T>& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epochs_done() const { return epochs_done_; }
  // Mean loss of every optimizer step taken by this object, in order.
  const std::vector<double>& step_losses() const { return step_losses_; }

 private:
  Trainer(TrainConfig cfg, Checkpoint<T> ck);
  nlohmann::json progress() const;

  TrainConfig cfg_;
  models::ModelGraph<T> model_;
  OptimState<T> state_;
  std::size_t epochs_done_ = 0;
  std::optional<double> best_eval_mse_;
  std::vector<double> step_losses_;
};

}  // namespace nowcast::trainer
