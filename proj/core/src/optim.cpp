// SPDX-License-Identifier: Apache-2.0
#include "tubesal/optim.hpp"

#include <cmath>
#include <numbers>

namespace tubesal {

template <typename T>
AdamState<T> AdamState<T>::init_like(const std::vector<NamedParam<T>>& params) {
    AdamState<T> s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.push_back(Tensor<T>::zeros(Shape(p.tensor.shape())));
        s.v.push_back(Tensor<T>::zeros(Shape(p.tensor.shape())));
    }
    return s;
}

template <typename T>
void adam_step(Tensor<T>& param, std::span<const T> grad, Tensor<T>& m, Tensor<T>& v,
               std::size_t t, T lr, T beta1, T beta2, T eps) {
    if (grad.size() != param.numel() || m.numel() != param.numel() || v.numel() != param.numel())
        throw DimensionError("adam_step: buffer sizes disagree with parameter " +
                             shape_str(param.shape()));
    if (!(lr > T(0))) throw DomainError("adam_step: learning rate must be positive");
    if (t == 0) throw DomainError("adam_step: bias-correction step must be >= 1");
    auto pv = param.values();
    auto mv = m.values();
    auto vv = v.values();
    const T bc1 = T(1) - T(std::pow(double(beta1), double(t)));
    const T bc2 = T(1) - T(std::pow(double(beta2), double(t)));
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const T g = grad[i];
        mv[i] = beta1 * mv[i] + (T(1) - beta1) * g;
        vv[i] = beta2 * vv[i] + (T(1) - beta2) * g * g;
        const T mhat = mv[i] / bc1;
        const T vhat = vv[i] / bc2;
        pv[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
Adam<T>::Adam(std::vector<NamedParam<T>> params, T beta1, T beta2, T eps)
    : params_(std::move(params)) {
    state_ = AdamState<T>::init_like(params_);
    state_.beta1 = beta1;
    state_.beta2 = beta2;
    state_.eps = eps;
}

template <typename T>
void Adam<T>::step(T lr) {
    ++state_.step;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].tensor;
        adam_step(p, std::span<const T>(p.grad().data(), p.numel()), state_.m[i], state_.v[i],
                  state_.step, lr, state_.beta1, state_.beta2, state_.eps);
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

double cosine_lr(std::size_t t, const CosineSchedule& sched) {
    // Endpoints are pinned so lr(0) == lr_max and lr(T..) == lr_min exactly.
    if (t == 0) return sched.lr_max;
    if (t >= sched.horizon) return sched.lr_min;
    const double frac = double(t) / double(sched.horizon);
    return sched.lr_min +
           0.5 * (sched.lr_max - sched.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

template struct AdamState<float>;
template struct AdamState<double>;
template class Adam<float>;
template class Adam<double>;
template void adam_step<float>(Tensor<float>&, std::span<const float>, Tensor<float>&,
                               Tensor<float>&, std::size_t, float, float, float, float);
template void adam_step<double>(Tensor<double>&, std::span<const double>, Tensor<double>&,
                                Tensor<double>&, std::size_t, double, double, double, double);

}  // namespace tubesal
