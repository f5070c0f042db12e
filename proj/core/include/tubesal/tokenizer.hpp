// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tubesal/tensor.hpp"

namespace tubesal::tok {

/// Saliency-guided masking: masked[t] = frame[t] * (1 - strength * map[t - offset]).
struct MaskSpec {
    std::size_t offset = 0;   // frames; maps for t < offset are taken as all-zero
    double strength = 1.0;    // in [0,1]; 1 removes salient pixels entirely
};

/// Tubelet tokens of shape (N(+1), d_t, E) with E = c*p*p, plus the grid the
/// sequence was extracted from. Token 0 is the task token when
/// has_task_token; token 1 + ((t*gh + r)*gw + c) is the tubelet at temporal
/// block t, row r, column c.
template <typename T>
struct TokenSequence {
    Tensor<T> tokens;
    std::size_t gt = 0, gh = 0, gw = 0;
    bool has_task_token = false;

    std::size_t num_tubelets() const { return gt * gh * gw; }
};

/// Pixel-wise multiplication with the inverted, strength-scaled prior map.
/// Frames with no prior yet (t < offset) pass through unchanged.
template <typename T>
Tensor<T> mask_frames(const Tensor<T>& frames, const Tensor<T>& saliency_maps,
                      const MaskSpec& spec);

/// Splits (d', c, H, W) into non-overlapping d_t x p x p tubelets, ordered
/// row-major within each temporal block, blocks advancing by d_t frames.
/// Each tubelet flattens (d_t, c, p, p) to (d_t, c*p*p).
template <typename T>
TokenSequence<T> extract_tubelets(const Tensor<T>& seq, std::size_t d_t, std::size_t p);

/// Inserts the one-hot task vector as token 0, replicated across all d_t
/// temporal slots.
template <typename T>
TokenSequence<T> prepend_task_token(const TokenSequence<T>& tokens, std::size_t task_id,
                                    std::size_t num_tasks);

/// Exact inverse of extract_tubelets; drops the task token first when
/// present. Participates in autodiff, so the decoder can reassemble
/// activations.
template <typename T>
Tensor<T> reassemble_tokens(const TokenSequence<T>& tokens, std::size_t c, std::size_t H,
                            std::size_t W);

#define TUBESAL_EXTERN_TOK(T)                                                            \
    extern template struct TokenSequence<T>;                                             \
    extern template Tensor<T> mask_frames<T>(const Tensor<T>&, const Tensor<T>&,         \
                                             const MaskSpec&);                           \
    extern template TokenSequence<T> extract_tubelets<T>(const Tensor<T>&, std::size_t,  \
                                                         std::size_t);                   \
    extern template TokenSequence<T> prepend_task_token<T>(const TokenSequence<T>&,      \
                                                           std::size_t, std::size_t);    \
    extern template Tensor<T> reassemble_tokens<T>(const TokenSequence<T>&, std::size_t, \
                                                   std::size_t, std::size_t);
TUBESAL_EXTERN_TOK(float)
TUBESAL_EXTERN_TOK(double)
#undef TUBESAL_EXTERN_TOK

}  // namespace tubesal::tok
