#include "nowcast/objectives.hpp"

#include "nowcast/parallel.hpp"

namespace nowcast::objectives {

namespace {

Tensor<double> to_double(const Tensor<double>& t) { return t; }

Tensor<double> to_double(const Tensor<float>& t) {
  std::vector<double> v(t.data().begin(), t.data().end());
  return Tensor<double>(t.shape(), std::move(v));
}

}  // namespace

template <typename T>
std::vector<Tensor<double>> predict_set(const models::ModelGraph<T>& model,
                                        const datasets::Dataset& data) {
  const std::size_t frames_in = models::input_frames_of(model.config);
  std::vector<Tensor<double>> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    NoGradGuard no_grad;  // grad mode is per thread
    const auto x = data[i].inputs<T>(frames_in);
    out[i] = to_double(models::predict(model, x, nn::Mode::eval));
  });
  return out;
}

template <typename T>
MetricsReport evaluate_set(const models::ModelGraph<T>& model, const datasets::Dataset& data,
                           double tau) {
  if (data.empty()) throw std::invalid_argument("evaluate_set: empty dataset");
  const auto predictions = predict_set(model, data);
  std::vector<Tensor<double>> truths;
  truths.reserve(data.size());
  for (const auto& s : data) truths.push_back(s.target<double>());
  return evaluate_predictions(truths, predictions, tau);
}

template std::vector<Tensor<double>> predict_set(const models::ModelGraph<float>&,
                                                 const datasets::Dataset&);
template std::vector<Tensor<double>> predict_set(const models::ModelGraph<double>&,
                                                 const datasets::Dataset&);
template MetricsReport evaluate_set(const models::ModelGraph<float>&, const datasets::Dataset&,
                                    double);
template MetricsReport evaluate_set(const models::ModelGraph<double>&, const datasets::Dataset&,
                                    double);

}  // namespace nowcast::objectives
