#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/parameters.hpp"

namespace nowcast::trainer {

struct NadamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Moments for the trainable entries of one parameter table, in table order.
template <typename T>
struct OptimState {
  NadamConfig hp;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static OptimState zeros(const ParameterTable<T>& params, NadamConfig hp = {});
};

// One Nesterov-Adam update of every trainable parameter:
//   t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2
//   theta -= lr (b1 m/(1-b1^t) + (1-b1) g/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
// A parameter without an accumulated gradient is treated as g = 0. Nothing
// is modified if any gradient is non-finite (NumericError names it).
template <typename T>
void nadam_step(const ParameterTable<T>& params, OptimState<T>& state);

}  // namespace nowcast::trainer
