#include "nowcast/trainer/init.hpp"

#include <algorithm>
#include <cmath>

#include "nowcast/rng.hpp"

namespace nowcast::trainer {

template <typename T>
void init_uniform(const ParameterTable<T>& params, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& e : params.entries()) {
    const auto values = e.tensor.mutable_data();
    switch (e.role) {
      case ParamRole::weight: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(e.fan_in, 1)));
        for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
        break;
      }
      case ParamRole::bn_gamma:
      case ParamRole::bn_running_var:
        std::fill(values.begin(), values.end(), T{1});
        break;
      case ParamRole::bias:
      case ParamRole::peephole:
      case ParamRole::bn_beta:
      case ParamRole::bn_running_mean:
        std::fill(values.begin(), values.end(), T{0});
        break;
    }
  }
}

template void init_uniform(const ParameterTable<float>&, std::uint64_t);
template void init_uniform(const ParameterTable<double>&, std::uint64_t);

}  // namespace nowcast::trainer
