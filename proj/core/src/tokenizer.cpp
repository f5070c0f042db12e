// SPDX-License-Identifier: Apache-2.0
#include "tubesal/tokenizer.hpp"

#include "tubesal/ops.hpp"

namespace tubesal::tok {

template <typename T>
Tensor<T> mask_frames(const Tensor<T>& frames, const Tensor<T>& saliency_maps,
                      const MaskSpec& spec) {
    if (frames.ndim() != 4 || saliency_maps.ndim() != 4)
        throw DimensionError("mask_frames: expected (d,c,H,W) frames and (d,1,H,W) maps, got " +
                             shape_str(frames.shape()) + " and " + shape_str(saliency_maps.shape()));
    const std::size_t d = frames.shape()[0], c = frames.shape()[1];
    const std::size_t h = frames.shape()[2], w = frames.shape()[3];
    if (saliency_maps.shape()[0] != d || saliency_maps.shape()[1] != 1 ||
        saliency_maps.shape()[2] != h || saliency_maps.shape()[3] != w)
        throw DimensionError("mask_frames: maps " + shape_str(saliency_maps.shape()) +
                             " not aligned with frames " + shape_str(frames.shape()));
    if (!(spec.strength >= 0.0 && spec.strength <= 1.0))
        throw DomainError("mask_frames: strength " + std::to_string(spec.strength) +
                          " outside [0,1]");

    Tensor<T> out = frames.clone();
    if (spec.strength == 0.0) return out;
    auto ov = out.values();
    auto mv = saliency_maps.values();
    const std::size_t hw = h * w;
    const T s = T(spec.strength);
    for (std::size_t t = spec.offset; t < d; ++t) {
        const T* map = mv.data() + (t - spec.offset) * hw;
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* px = ov.data() + (t * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
                // map value 0 leaves the pixel bitwise untouched
                if (map[p] != T(0)) px[p] *= (T(1) - s * map[p]);
            }
        }
    }
    return out;
}

namespace {

// Extraction permutes (gt, d_t, c, gh, p, gw, p) -> (gt, gh, gw, d_t, c, p, p);
// reassembly applies the inverse.
const std::vector<std::size_t> kExtractPerm = {0, 3, 5, 1, 2, 4, 6};
const std::vector<std::size_t> kReassemblePerm = {0, 3, 4, 1, 5, 2, 6};

}  // namespace

template <typename T>
TokenSequence<T> extract_tubelets(const Tensor<T>& seq, std::size_t d_t, std::size_t p) {
    if (seq.ndim() != 4)
        throw DimensionError("extract_tubelets: expected (d,c,H,W), got " +
                             shape_str(seq.shape()));
    const std::size_t d = seq.shape()[0], c = seq.shape()[1];
    const std::size_t H = seq.shape()[2], W = seq.shape()[3];
    if (d_t == 0 || d % d_t != 0)
        throw ConfigError("extract_tubelets: tubelet depth " + std::to_string(d_t) +
                          " does not divide frame depth " + std::to_string(d));
    if (p == 0 || H % p != 0)
        throw ConfigError("extract_tubelets: patch size " + std::to_string(p) +
                          " does not divide height " + std::to_string(H));
    if (W % p != 0)
        throw ConfigError("extract_tubelets: patch size " + std::to_string(p) +
                          " does not divide width " + std::to_string(W));
    TokenSequence<T> out;
    out.gt = d / d_t;
    out.gh = H / p;
    out.gw = W / p;
    out.has_task_token = false;
    auto grid7 = ops::reshape(seq, {out.gt, d_t, c, out.gh, p, out.gw, p});
    auto perm = ops::permute(grid7, kExtractPerm);
    out.tokens = ops::reshape(perm, {out.num_tubelets(), d_t, c * p * p});
    return out;
}

template <typename T>
TokenSequence<T> prepend_task_token(const TokenSequence<T>& tokens, std::size_t task_id,
                                    std::size_t num_tasks) {
    if (tokens.has_task_token)
        throw DomainError("prepend_task_token: sequence already has a task token");
    const std::size_t n = tokens.tokens.shape()[0];
    const std::size_t d_t = tokens.tokens.shape()[1];
    const std::size_t e = tokens.tokens.shape()[2];
    if (task_id >= num_tasks)
        throw DomainError("prepend_task_token: task_id " + std::to_string(task_id) +
                          " out of range for " + std::to_string(num_tasks) + " tasks");
    if (num_tasks > e)
        throw DomainError("prepend_task_token: num_tasks " + std::to_string(num_tasks) +
                          " exceeds token width " + std::to_string(e));
    TokenSequence<T> out;
    out.gt = tokens.gt;
    out.gh = tokens.gh;
    out.gw = tokens.gw;
    out.has_task_token = true;
    out.tokens = Tensor<T>{Shape{n + 1, d_t, e}};
    auto src = tokens.tokens.values();
    auto dst = out.tokens.values();
    for (std::size_t slot = 0; slot < d_t; ++slot) dst[slot * e + task_id] = T(1);
    std::copy(src.begin(), src.end(), dst.begin() + long(d_t * e));
    return out;
}

template <typename T>
Tensor<T> reassemble_tokens(const TokenSequence<T>& tokens, std::size_t c, std::size_t H,
                            std::size_t W) {
    const std::size_t expected_n = tokens.num_tubelets() + (tokens.has_task_token ? 1 : 0);
    if (tokens.tokens.ndim() != 3 || tokens.tokens.shape()[0] != expected_n)
        throw DimensionError("reassemble_tokens: sequence " + shape_str(tokens.tokens.shape()) +
                             " does not match grid (" + std::to_string(tokens.gt) + "," +
                             std::to_string(tokens.gh) + "," + std::to_string(tokens.gw) + ")");
    const std::size_t d_t = tokens.tokens.shape()[1];
    const std::size_t e = tokens.tokens.shape()[2];
    if (tokens.gh == 0 || tokens.gw == 0 || H % tokens.gh != 0 || W % tokens.gw != 0)
        throw DimensionError("reassemble_tokens: grid does not tile " + std::to_string(H) + "x" +
                             std::to_string(W));
    const std::size_t p = H / tokens.gh;
    if (W / tokens.gw != p || e != c * p * p)
        throw DimensionError("reassemble_tokens: token width " + std::to_string(e) +
                             " inconsistent with c=" + std::to_string(c) + ", patch " +
                             std::to_string(p));
    Tensor<T> body = tokens.tokens;
    if (tokens.has_task_token) body = ops::slice(body, 0, 1, tokens.num_tubelets());
    auto grid7 = ops::reshape(body, {tokens.gt, tokens.gh, tokens.gw, d_t, c, p, p});
    auto perm = ops::permute(grid7, kReassemblePerm);
    return ops::reshape(perm, {tokens.gt * d_t, c, H, W});
}

#define TUBESAL_INSTANTIATE_TOK(T)                                                            \
    template struct TokenSequence<T>;                                                         \
    template Tensor<T> mask_frames<T>(const Tensor<T>&, const Tensor<T>&, const MaskSpec&);   \
    template TokenSequence<T> extract_tubelets<T>(const Tensor<T>&, std::size_t, std::size_t); \
    template TokenSequence<T> prepend_task_token<T>(const TokenSequence<T>&, std::size_t,     \
                                                    std::size_t);                             \
    template Tensor<T> reassemble_tokens<T>(const TokenSequence<T>&, std::size_t, std::size_t, \
                                            std::size_t);
TUBESAL_INSTANTIATE_TOK(float)
TUBESAL_INSTANTIATE_TOK(double)
#undef TUBESAL_INSTANTIATE_TOK

}  // namespace tubesal::tok
