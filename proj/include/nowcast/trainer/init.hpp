#pragma once

#include <cstdint>

#include "nowcast/parameters.hpp"

namespace nowcast::trainer {

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases and peephole weights
// zero; batch-norm gamma 1, beta 0, running mean 0, running variance 1.
// Visits the table in order, so the result depends only on the seed.
template <typename T>
void init_uniform(const ParameterTable<T>& params, std::uint64_t seed);

}  // namespace nowcast::trainer
