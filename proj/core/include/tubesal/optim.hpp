// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "tubesal/tensor.hpp"

namespace tubesal {

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

/// Bias-corrected Adam moments for a set of parameters. m/v buffers are kept
/// in parameter order; `step` counts completed updates.
template <typename T>
struct AdamState {
    std::size_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    static AdamState init_like(const std::vector<NamedParam<T>>& params);
};

/// One Adam update for a single parameter. `t` is the 1-based step count the
/// bias correction uses; the caller increments the shared step before the
/// first parameter of an optimizer step.
template <typename T>
void adam_step(Tensor<T>& param, std::span<const T> grad, Tensor<T>& m, Tensor<T>& v,
               std::size_t t, T lr, T beta1, T beta2, T eps);

/// Applies adam_step across all parameters using their accumulated grads,
/// then zeroes the grads.
template <typename T>
class Adam {
public:
    Adam(std::vector<NamedParam<T>> params, T beta1 = T(0.9), T beta2 = T(0.999),
         T eps = T(1e-8));

    void step(T lr);
    void zero_grad();

    AdamState<T>& state() { return state_; }
    const AdamState<T>& state() const { return state_; }
    const std::vector<NamedParam<T>>& params() const { return params_; }

private:
    std::vector<NamedParam<T>> params_;
    AdamState<T> state_;
};

/// lr(t) = lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * min(t, T)/T)),
/// held at lr_min once the horizon is reached.
struct CosineSchedule {
    double lr_max = 1e-5;
    double lr_min = 1e-7;
    std::size_t horizon = 10000;
};

double cosine_lr(std::size_t t, const CosineSchedule& sched);

extern template struct AdamState<float>;
extern template struct AdamState<double>;
extern template class Adam<float>;
extern template class Adam<double>;
extern template void adam_step<float>(Tensor<float>&, std::span<const float>, Tensor<float>&,
                                      Tensor<float>&, std::size_t, float, float, float, float);
extern template void adam_step<double>(Tensor<double>&, std::span<const double>, Tensor<double>&,
                                       Tensor<double>&, std::size_t, double, double, double,
                                       double);

}  // namespace tubesal
