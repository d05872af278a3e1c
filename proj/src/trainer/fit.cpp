#include "nowcast/trainer/fit.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nowcast/autodiff.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::trainer {

using objectives::LossKind;

void TrainConfig::validate() const {
  models::validate(model);
  optimizer.validate();
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be at least 1");
  if (!(eccr_tau >= 0 && eccr_tau <= 255)) throw std::invalid_argument("train: eccr tau must be in [0, 255]");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"loss", objectives::to_string(loss)}, {"epochs", epochs},         {"batch_size", batch_size},
          {"seed", seed},                        {"eval_every", eval_every}, {"eccr_tau", eccr_tau}};
}

std::string best_checkpoint_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ".best";
  return path.substr(0, dot) + ".best" + path.substr(dot);
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["train_loss"] = train_loss;
  j["fused_mse"] = fused_mse;
  j["fused_forecaster_sum"] = fused_forecaster_sum;
  j["fused_forecaster_mean"] = fused_forecaster_mean;
  if (eval) {
    j["eval"] = objectives::to_json(*eval);
    j["best"] = best;
  }
  return j;
}

namespace {

template <typename T>
struct SampleForward {
  Tensor<T> objective;
  Tensor<T> fused;
  Tensor<T> target;
};

template <typename T>
SampleForward<T> forward_sample(const models::ModelGraph<T>& model, const datasets::SequenceSample& s,
                                LossKind loss, nn::Mode mode) {
  const auto x = s.inputs<T>(models::input_frames_of(model.config));
  SampleForward<T> f;
  f.target = s.target<T>();
  if (model.kind() == models::ModelKind::fclstm) {
    auto out = models::forward_fclstm(model, x, mode);
    f.objective = objectives::multiscale_loss(out, f.target, loss);
    f.fused = out.fused;
  } else {
    f.fused = models::forward_baseline(model, x, mode);
    f.objective = objectives::pixel_loss(loss, f.target, f.fused);
  }
  return f;
}

}  // namespace

template <typename T>
double dataset_loss(const models::ModelGraph<T>& model, const datasets::Dataset& data, LossKind loss) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  NoGradGuard no_grad;
  double total = 0;
  for (const auto& s : data) total += forward_sample(model, s, loss, nn::Mode::probe).objective.item();
  return total / static_cast<double>(data.size());
}

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  model_ = models::build_model<T>(cfg_.model, cfg_.seed);
  state_ = OptimState<T>::zeros(model_.params, cfg_.optimizer);
}

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg, Checkpoint<T> ck) : cfg_(std::move(cfg)) {
  model_ = std::move(ck.model);
  state_ = std::move(ck.state);
  cfg_.model = model_.config;
  cfg_.optimizer = state_.hp;
  const auto progress = ck.header.value("progress", nlohmann::json::object());
  epochs_done_ = progress.value("epochs_done", std::size_t{0});
  if (progress.contains("best_eval_mse")) best_eval_mse_ = progress["best_eval_mse"].template get<double>();
  if (ck.header.contains("train")) {
    const auto& t = ck.header["train"];
    cfg_.loss = objectives::parse_loss_kind(t.at("loss").template get<std::string>());
    cfg_.batch_size = t.at("batch_size").template get<std::size_t>();
    cfg_.seed = t.at("seed").template get<std::uint64_t>();
  }
  cfg_.validate();
}

template <typename T>
Trainer<T> Trainer<T>::resume(const std::string& checkpoint, TrainConfig cfg) {
  return Trainer(std::move(cfg), load_checkpoint<T>(checkpoint));
}

template <typename T>
nlohmann::json Trainer<T>::progress() const {
  nlohmann::json p{{"epochs_done", epochs_done_}};
  if (best_eval_mse_) p["best_eval_mse"] = *best_eval_mse_;
  return {{"train", cfg_.to_json()}, {"progress", p}};
}

template <typename T>
EpochLog Trainer<T>::train_epoch(const datasets::Dataset& train, const datasets::Dataset& eval) {
  if (train.empty()) throw std::invalid_argument("train: empty training set");
  datasets::require_homogeneous(train, "train");
  const std::size_t epoch = epochs_done_ + 1;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg_.seed, epoch));
  rng.shuffle(order.begin(), order.end());

  EpochLog log;
  log.epoch = epoch;
  model_.params.zero_grad();
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    const T inv_batch = T{1} / static_cast<T>(end - start);
    double batch_loss = 0;
    for (std::size_t k = start; k < end; ++k) {
      const auto f = forward_sample(model_, train[order[k]], cfg_.loss, nn::Mode::train);
      const double value = f.objective.item();
      if (!std::isfinite(value)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(state_.step + 1));
      }
      backward(scale(f.objective, inv_batch));
      batch_loss += value;
      log.train_loss += value;
      {
        NoGradGuard no_grad;
        log.fused_mse += objectives::mse_loss(f.target, f.fused).item();
        const double raw = objectives::forecaster_loss(f.target, f.fused).item();
        log.fused_forecaster_sum += raw;
        log.fused_forecaster_mean += raw / static_cast<double>(f.target.numel());
      }
    }
    nadam_step(model_.params, state_);
    model_.params.zero_grad();
    step_losses_.push_back(batch_loss / static_cast<double>(end - start));
  }
  const double n = static_cast<double>(train.size());
  log.train_loss /= n;
  log.fused_mse /= n;
  log.fused_forecaster_sum /= n;
  log.fused_forecaster_mean /= n;
  log.step = state_.step;
  epochs_done_ = epoch;

  const bool final_epoch = epoch >= cfg_.epochs;
  const bool cadence = cfg_.eval_every > 0 && epoch % cfg_.eval_every == 0;
  if (!eval.empty() && (cadence || final_epoch)) {
    log.eval = objectives::evaluate_set(model_, eval, cfg_.eccr_tau);
    if (!best_eval_mse_ || log.eval->mse < *best_eval_mse_) {
      best_eval_mse_ = log.eval->mse;
      log.best = true;
    }
  }
  if (!cfg_.checkpoint_path.empty()) {
    const auto extra = progress();
    if (log.best) save_checkpoint(model_, state_, best_checkpoint_path(cfg_.checkpoint_path), extra);
    save_checkpoint(model_, state_, cfg_.checkpoint_path, extra);
  }
  return log;
}

template <typename T>
std::vector<EpochLog> Trainer<T>::fit(const datasets::Dataset& train, const datasets::Dataset& eval,
                                      const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  while (epochs_done_ < cfg_.epochs) {
    logs.push_back(train_epoch(train, eval));
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

template double dataset_loss(const models::ModelGraph<float>&, const datasets::Dataset&, LossKind);
template double dataset_loss(const models::ModelGraph<double>&, const datasets::Dataset&, LossKind);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace nowcast::trainer
