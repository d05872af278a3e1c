#include "nowcast/parameters.hpp"

#include <stdexcept>

namespace nowcast {

bool is_trainable(ParamRole role) {
  return role != ParamRole::bn_running_mean && role != ParamRole::bn_running_var;
}

template <typename T>
Tensor<T> ParameterTable<T>::add(std::string name, Shape shape, ParamRole role, std::size_t fan_in) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name: " + name);
  const T fill = role == ParamRole::bn_gamma || role == ParamRole::bn_running_var ? T{1} : T{0};
  Tensor<T> t(std::move(shape), fill);
  t.set_requires_grad(is_trainable(role));
  entries_.push_back({std::move(name), t, role, fan_in});
  return t;
}

template <typename T>
const ParamEntry<T>* ParameterTable<T>::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename T>
void ParameterTable<T>::zero_grad() const {
  for (const auto& e : entries_) e.tensor.zero_grad();
}

template class ParameterTable<float>;
template class ParameterTable<double>;

}  // namespace nowcast
