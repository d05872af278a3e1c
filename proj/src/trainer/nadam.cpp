#include "nowcast/trainer/nadam.hpp"

#include <cmath>
#include <stdexcept>

#include "nowcast/error.hpp"

namespace nowcast::trainer {

void NadamConfig::validate() const {
  if (!(lr >= 0 && std::isfinite(lr))) throw std::invalid_argument("nadam: lr must be finite and >= 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw std::invalid_argument("nadam: beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("nadam: beta2 must be in [0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("nadam: eps must be positive");
}

template <typename T>
OptimState<T> OptimState<T>::zeros(const ParameterTable<T>& params, NadamConfig hp) {
  hp.validate();
  OptimState s;
  s.hp = hp;
  for (const auto& e : params.entries()) {
    if (!e.trainable()) continue;
    s.names.push_back(e.name);
    s.m.emplace_back(e.tensor.numel(), T{0});
    s.v.emplace_back(e.tensor.numel(), T{0});
  }
  return s;
}

template <typename T>
void nadam_step(const ParameterTable<T>& params, OptimState<T>& state) {
  std::vector<const ParamEntry<T>*> trainable;
  for (const auto& e : params.entries()) {
    if (e.trainable()) trainable.push_back(&e);
  }
  if (trainable.size() != state.names.size()) {
    throw std::logic_error("nadam: optimizer state tracks " + std::to_string(state.names.size()) +
                           " tensors, model has " + std::to_string(trainable.size()));
  }
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    const auto& e = *trainable[k];
    if (e.name != state.names[k] || state.m[k].size() != e.tensor.numel()) {
      throw std::logic_error("nadam: optimizer state does not match parameter " + e.name);
    }
    if (!e.tensor.has_grad()) continue;
    const auto g = e.tensor.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(static_cast<double>(g[i]))) {
        throw NumericError("nadam: non-finite gradient in " + e.name + " at index " + std::to_string(i));
      }
    }
  }

  const auto& hp = state.hp;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    const auto& e = *trainable[k];
    const bool has = e.tensor.has_grad();
    const auto theta = e.tensor.mutable_data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = has ? static_cast<double>(e.tensor.grad()[i]) : 0.0;
      const double mi = hp.beta1 * m[i] + (1 - hp.beta1) * g;
      const double vi = hp.beta2 * v[i] + (1 - hp.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      const double direction = hp.beta1 * m_hat + (1 - hp.beta1) * g / bc1;
      theta[i] = static_cast<T>(theta[i] - hp.lr * direction / (std::sqrt(v_hat) + hp.eps));
    }
  }
}

template struct OptimState<float>;
template struct OptimState<double>;
template void nadam_step(const ParameterTable<float>&, OptimState<float>&);
template void nadam_step(const ParameterTable<double>&, OptimState<double>&);

}  // namespace nowcast::trainer
