// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tubesal/tensor.hpp"

namespace tubesal::ops {

// Elementwise with NumPy-style broadcasting (extents align right; an extent
// must match or be 1).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s);

/// Batched matrix product over the last two axes; leading axes broadcast.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes);
/// Contiguous range along one axis.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

/// Normalizes each 1-d slice along `axis` to zero mean / unit population
/// variance, then applies the affine (gamma, beta), both of extent(axis).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::size_t axis, T eps = T(1e-5));

/// Exact Gaussian-CDF form x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// 3x3 convolution, stride 1, zero padding 1: (b,cin,h,w) x (cout,cin,3,3)
/// + bias(cout) -> (b,cout,h,w).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias);

/// Mean binary cross-entropy between logits and targets in [0,1], computed
/// in the fused numerically stable form. Returns a scalar tensor.
template <typename T>
Tensor<T> sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& targets);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

#define TUBESAL_EXTERN_OPS(T)                                                             \
    extern template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                 \
    extern template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                 \
    extern template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                 \
    extern template Tensor<T> scale<T>(const Tensor<T>&, T);                              \
    extern template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                         \
    extern template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);              \
    extern template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                        \
    extern template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::size_t>&); \
    extern template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t); \
    extern template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                  \
    extern template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, T); \
    extern template Tensor<T> gelu<T>(const Tensor<T>&);                                  \
    extern template Tensor<T> sigmoid<T>(const Tensor<T>&);                               \
    extern template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    extern template Tensor<T> sigmoid_bce<T>(const Tensor<T>&, const Tensor<T>&);         \
    extern template Tensor<T> sum<T>(const Tensor<T>&);                                   \
    extern template Tensor<T> mean<T>(const Tensor<T>&);

TUBESAL_EXTERN_OPS(float)
TUBESAL_EXTERN_OPS(double)
#undef TUBESAL_EXTERN_OPS

}  // namespace tubesal::ops
