#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// What a named tensor is for. Drives initialization and decides whether the
// optimizer touches it.
enum class ParamRole {
  weight,
  bias,
  peephole,
  bn_gamma,
  bn_beta,
  bn_running_mean,  // buffer
  bn_running_var,   // buffer
};

bool is_trainable(ParamRole role);

template <typename T>
struct ParamEntry {
  std::string name;
  Tensor<T> tensor;
  ParamRole role;
  std::size_t fan_in;  // input connections per output unit; 0 where unused

  bool trainable() const { return is_trainable(role); }
};

// Ordered, uniquely named set of a model's tensors (trainable parameters and
// batch-norm buffers). Order is registration order and is stable across
// builds of the same configuration.
template <typename T>
class ParameterTable {
 public:
  // Registers a new tensor and returns a handle aliasing the stored one.
  Tensor<T> add(std::string name, Shape shape, ParamRole role, std::size_t fan_in = 0);

  const std::vector<ParamEntry<T>>& entries() const { return entries_; }
  const ParamEntry<T>* find(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }

  void zero_grad() const;

 private:
  std::vector<ParamEntry<T>> entries_;
};

extern template class ParameterTable<float>;
extern template class ParameterTable<double>;

}  // namespace nowcast
