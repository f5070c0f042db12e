// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tubesal/dataset.hpp"
#include "tubesal/optim.hpp"
#include "tubesal/tensor.hpp"
#include "tubesal/tokenizer.hpp"

namespace tubesal::model {

/// All architecture hyperparameters. Defaults are the desk-scale
/// configuration (dim 64, 4 heads, 2+2+2 layers, 64x64 input); the
/// full-scale values (dim 768, 12 heads, 6+6 layers, 224x224) remain
/// expressible.
struct ModelConfig {
    std::size_t d_f = 4;
    std::size_t d_t = 2;
    std::size_t stride = 5;
    std::size_t patch = 16;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t stream_layers = 2;
    std::size_t multimodal_layers = 2;
    std::size_t mlp_ratio = 4;
    double p_drop = 0.6;
    tok::MaskSpec mask;
    std::size_t num_tasks = 2;
    std::size_t task_id = 0;
    std::size_t decoder_channels = 8;
    std::size_t input_height = 64;
    std::size_t input_width = 64;

    void validate() const;
    std::size_t grid_h() const { return input_height / patch; }
    std::size_t grid_w() const { return input_width / patch; }
    /// Tubelet count for the full frame depth (task token excluded).
    std::size_t max_tokens() const { return (d_f / d_t) * grid_h() * grid_w(); }
};

/// Pre-norm Transformer encoder layer parameters: attention projections and
/// the two-layer GELU feed-forward.
template <typename T>
struct EncoderLayerParams {
    Tensor<T> ln1_gamma, ln1_beta;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln2_gamma, ln2_beta;
    Tensor<T> ff1_w, ff1_b, ff2_w, ff2_b;
};

enum class AttentionAxis { Spatial, Temporal };

/// Vaswani sinusoid table: PE(pos, 2i) = sin(pos / 10000^(2i/dim)),
/// PE(pos, 2i+1) = cos(same). dim must be even.
template <typename T>
Tensor<T> positional_encoding(std::size_t max_pos, std::size_t dim);

/// Pre-LN multi-head self-attention + feed-forward block on (A, B, dim).
/// Spatial attends along axis 0 (B folded into the batch), Temporal along
/// axis 1 (A folded into the batch). No positional term is applied inside,
/// so the layer is permutation-equivariant along the attended axis.
template <typename T>
Tensor<T> attention_layer(const Tensor<T>& x, AttentionAxis axis,
                          const EncoderLayerParams<T>& params, std::size_t heads);

/// Applies the layers with the alternating plan: first half spatial, second
/// half temporal. Layer count must be even.
template <typename T>
Tensor<T> encoder_stream(const Tensor<T>& x, const std::vector<EncoderLayerParams<T>>& layers,
                         std::size_t heads);

/// Elementwise sum of the two modality streams (shapes must be identical).
template <typename T>
Tensor<T> fuse_streams(const Tensor<T>& frame_tokens, const Tensor<T>& saliency_tokens);

template <typename T>
struct ForwardResult {
    Tensor<T> probs;   // (d', 1, H, W) in [0,1]
    Tensor<T> logits;  // (d', 1, H, W), probs = sigmoid(logits)
};

/// The dual-stream spatiotemporal Transformer: saliency-guided masking,
/// tubelet tokenization of both streams, per-modality encoders, sum fusion,
/// multimodal encoder, convolutional decoder head.
template <typename T>
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    ForwardResult<T> forward(const data::ClipSample<T>& clip) const;

    /// Per-temporal-slot affine embedding of a token sequence plus both
    /// positional terms (token index and temporal slot).
    Tensor<T> embed_stream(const tok::TokenSequence<T>& tokens, bool saliency_stream) const;

    /// Token-to-patch projection, reassembly and the three-layer conv head.
    ForwardResult<T> decode_head(const Tensor<T>& tokens, std::size_t gt, std::size_t gh,
                                 std::size_t gw) const;

    /// Stable-ordered named parameter handles (shared with the model).
    std::vector<NamedParam<T>> parameters() const;
    std::size_t parameter_count() const;
    const ModelConfig& config() const { return cfg_; }
    const Tensor<T>& positional_table() const { return pe_; }

private:
    ModelConfig cfg_;
    Tensor<T> pe_;
    Tensor<T> frame_embed_w_, frame_embed_b_;
    Tensor<T> sal_embed_w_, sal_embed_b_;
    std::vector<EncoderLayerParams<T>> frame_layers_, sal_layers_, mm_layers_;
    Tensor<T> dec_proj_w_, dec_proj_b_;
    Tensor<T> conv1_w_, conv1_b_, conv2_w_, conv2_b_, conv3_w_, conv3_b_;
};

#define TUBESAL_EXTERN_MODEL(T)                                                              \
    extern template struct EncoderLayerParams<T>;                                            \
    extern template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);              \
    extern template Tensor<T> attention_layer<T>(const Tensor<T>&, AttentionAxis,            \
                                                 const EncoderLayerParams<T>&, std::size_t); \
    extern template Tensor<T> encoder_stream<T>(const Tensor<T>&,                            \
                                                const std::vector<EncoderLayerParams<T>>&,   \
                                                std::size_t);                                \
    extern template Tensor<T> fuse_streams<T>(const Tensor<T>&, const Tensor<T>&);           \
    extern template class Model<T>;
TUBESAL_EXTERN_MODEL(float)
TUBESAL_EXTERN_MODEL(double)
#undef TUBESAL_EXTERN_MODEL

}  // namespace tubesal::model
