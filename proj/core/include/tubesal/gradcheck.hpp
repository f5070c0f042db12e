// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "tubesal/tensor.hpp"

namespace tubesal {

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t coords_checked = 0;
};

/// Compares tape gradients of a scalar-valued function against central
/// finite differences. `f` must evaluate the same computation every call;
/// its inputs are perturbed in place. The finite-difference side only uses
/// forward evaluations, so it is independent of the backward closures it
/// checks. With `max_coords_per_input` > 0 a seeded random subset of
/// coordinates is checked per input.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(void)>& f,
                           std::vector<Tensor<T>> inputs, double step = 1e-5,
                           std::size_t max_coords_per_input = 0, std::uint64_t seed = 0);

extern template GradCheckResult grad_check<float>(const std::function<Tensor<float>(void)>&,
                                                  std::vector<Tensor<float>>, double,
                                                  std::size_t, std::uint64_t);
extern template GradCheckResult grad_check<double>(const std::function<Tensor<double>(void)>&,
                                                   std::vector<Tensor<double>>, double,
                                                   std::size_t, std::uint64_t);

}  // namespace tubesal
