#pragma once

#include <functional>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Compares reverse-mode gradients against central differences.
//
// `f` must rebuild its graph from the current values of `wrt` on every call
// and return a single-element tensor. Returns the maximum over all
// coordinates of |analytic - numeric| / max(1, |numeric|).
//
// Throws std::invalid_argument if eps is outside (0, 1e-2] and NumericError
// if any evaluation is non-finite. Gradients on `wrt` are overwritten.
double fd_check(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& wrt,
                double eps = 1e-5);

// Single-input convenience form.
double fd_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                const Tensor<double>& x, double eps = 1e-5);

}  // namespace nowcast
