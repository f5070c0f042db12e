// SPDX-License-Identifier: Apache-2.0
#include "tubesal/model.hpp"

#include <cmath>

#include "tubesal/ops.hpp"

namespace tubesal::model {

void ModelConfig::validate() const {
    if (dim == 0 || dim % 2 != 0)
        throw ConfigError("model: dim must be positive and even, got " + std::to_string(dim));
    if (heads == 0 || dim % heads != 0)
        throw ConfigError("model: heads " + std::to_string(heads) + " must divide dim " +
                          std::to_string(dim));
    if (d_t == 0 || d_f % d_t != 0)
        throw ConfigError("model: d_t " + std::to_string(d_t) + " must divide d_f " +
                          std::to_string(d_f));
    if (stream_layers % 2 != 0 || multimodal_layers % 2 != 0)
        throw ConfigError("model: layer counts must be even so the spatial half is well defined");
    if (patch == 0 || input_height % patch != 0 || input_width % patch != 0)
        throw ConfigError("model: patch " + std::to_string(patch) + " must tile input " +
                          std::to_string(input_height) + "x" + std::to_string(input_width));
    if (num_tasks == 0 || task_id >= num_tasks)
        throw ConfigError("model: task_id " + std::to_string(task_id) +
                          " out of range for num_tasks " + std::to_string(num_tasks));
    if (num_tasks > patch * patch)
        throw ConfigError("model: num_tasks exceeds the saliency token width " +
                          std::to_string(patch * patch));
    if (decoder_channels == 0) throw ConfigError("model: decoder_channels must be >= 1");
    if (mlp_ratio == 0) throw ConfigError("model: mlp_ratio must be >= 1");
    if (!(p_drop >= 0.0 && p_drop <= 1.0))
        throw ConfigError("model: p_drop outside [0,1]");
}

template <typename T>
Tensor<T> positional_encoding(std::size_t max_pos, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0)
        throw ConfigError("positional_encoding: dim must be even, got " + std::to_string(dim));
    Tensor<T> pe{Shape{max_pos, dim}};
    auto v = pe.values();
    for (std::size_t pos = 0; pos < max_pos; ++pos) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
            const double angle =
                double(pos) / std::pow(10000.0, double(2 * i) / double(dim));
            v[pos * dim + 2 * i] = T(std::sin(angle));
            v[pos * dim + 2 * i + 1] = T(std::cos(angle));
        }
    }
    return pe;
}

namespace {

// Pre-LN MHSA + pre-LN feed-forward on (batch, seq, dim).
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderLayerParams<T>& p, std::size_t heads) {
    const std::size_t batch = x.shape()[0], seq = x.shape()[1], dim = x.shape()[2];
    const std::size_t hd = dim / heads;

    auto h = ops::layer_norm(x, p.ln1_gamma, p.ln1_beta, 2);
    auto split = [&](const Tensor<T>& t) {
        // (batch, seq, dim) -> (batch, heads, seq, hd)
        return ops::permute(ops::reshape(t, {batch, seq, heads, hd}), {0, 2, 1, 3});
    };
    auto q = split(ops::add(ops::matmul(h, p.wq), p.bq));
    auto k = split(ops::add(ops::matmul(h, p.wk), p.bk));
    auto v = split(ops::add(ops::matmul(h, p.wv), p.bv));

    auto scores = ops::scale(ops::matmul(q, ops::permute(k, {0, 1, 3, 2})),
                             T(1.0 / std::sqrt(double(hd))));
    auto attn = ops::softmax(scores, 3);
    auto ctx = ops::matmul(attn, v);
    auto merged = ops::reshape(ops::permute(ctx, {0, 2, 1, 3}), {batch, seq, dim});
    auto projected = ops::add(ops::matmul(merged, p.wo), p.bo);
    auto x1 = ops::add(x, projected);

    auto h2 = ops::layer_norm(x1, p.ln2_gamma, p.ln2_beta, 2);
    auto f = ops::add(ops::matmul(ops::gelu(ops::add(ops::matmul(h2, p.ff1_w), p.ff1_b)), p.ff2_w),
                      p.ff2_b);
    return ops::add(x1, f);
}

}  // namespace

template <typename T>
Tensor<T> attention_layer(const Tensor<T>& x, AttentionAxis axis,
                          const EncoderLayerParams<T>& params, std::size_t heads) {
    if (x.ndim() != 3)
        throw DimensionError("attention_layer: expected (A,B,dim), got " + shape_str(x.shape()));
    if (axis == AttentionAxis::Temporal) return encoder_block(x, params, heads);
    // spatial: attend along axis 0 with axis 1 folded into the batch
    auto swapped = ops::permute(x, {1, 0, 2});
    auto y = encoder_block(swapped, params, heads);
    return ops::permute(y, {1, 0, 2});
}

template <typename T>
Tensor<T> encoder_stream(const Tensor<T>& x, const std::vector<EncoderLayerParams<T>>& layers,
                         std::size_t heads) {
    if (layers.size() % 2 != 0)
        throw ConfigError("encoder_stream: layer count must be even, got " +
                          std::to_string(layers.size()));
    Tensor<T> cur = x;
    const std::size_t half = layers.size() / 2;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const AttentionAxis axis = i < half ? AttentionAxis::Spatial : AttentionAxis::Temporal;
        cur = attention_layer(cur, axis, layers[i], heads);
    }
    return cur;
}

template <typename T>
Tensor<T> fuse_streams(const Tensor<T>& frame_tokens, const Tensor<T>& saliency_tokens) {
    if (frame_tokens.shape() != saliency_tokens.shape())
        throw DimensionError("fuse_streams: shape mismatch: " + shape_str(frame_tokens.shape()) +
                             " vs " + shape_str(saliency_tokens.shape()));
    return ops::add(frame_tokens, saliency_tokens);
}

namespace {

template <typename T>
Tensor<T> init_weight(Shape shape, Rng& rng) {
    Tensor<T> t{std::move(shape), true};
    for (auto& v : t.values()) v = T(rng.trunc_normal(0.02));
    return t;
}

template <typename T>
Tensor<T> init_zeros(Shape shape) {
    return Tensor<T>::zeros(std::move(shape), true);
}

template <typename T>
Tensor<T> init_ones(Shape shape) {
    return Tensor<T>::full(std::move(shape), T(1), true);
}

template <typename T>
EncoderLayerParams<T> init_layer(std::size_t dim, std::size_t mlp_ratio, Rng& rng) {
    EncoderLayerParams<T> p;
    p.ln1_gamma = init_ones<T>({dim});
    p.ln1_beta = init_zeros<T>({dim});
    p.wq = init_weight<T>({dim, dim}, rng);
    p.bq = init_zeros<T>({dim});
    p.wk = init_weight<T>({dim, dim}, rng);
    p.bk = init_zeros<T>({dim});
    p.wv = init_weight<T>({dim, dim}, rng);
    p.bv = init_zeros<T>({dim});
    p.wo = init_weight<T>({dim, dim}, rng);
    p.bo = init_zeros<T>({dim});
    p.ln2_gamma = init_ones<T>({dim});
    p.ln2_beta = init_zeros<T>({dim});
    p.ff1_w = init_weight<T>({dim, mlp_ratio * dim}, rng);
    p.ff1_b = init_zeros<T>({mlp_ratio * dim});
    p.ff2_w = init_weight<T>({mlp_ratio * dim, dim}, rng);
    p.ff2_b = init_zeros<T>({dim});
    return p;
}

template <typename T>
void collect_layer(std::vector<NamedParam<T>>& out, const std::string& prefix,
                   const EncoderLayerParams<T>& p) {
    out.push_back({prefix + ".ln1.gamma", p.ln1_gamma});
    out.push_back({prefix + ".ln1.beta", p.ln1_beta});
    out.push_back({prefix + ".attn.wq", p.wq});
    out.push_back({prefix + ".attn.bq", p.bq});
    out.push_back({prefix + ".attn.wk", p.wk});
    out.push_back({prefix + ".attn.bk", p.bk});
    out.push_back({prefix + ".attn.wv", p.wv});
    out.push_back({prefix + ".attn.bv", p.bv});
    out.push_back({prefix + ".attn.wo", p.wo});
    out.push_back({prefix + ".attn.bo", p.bo});
    out.push_back({prefix + ".ln2.gamma", p.ln2_gamma});
    out.push_back({prefix + ".ln2.beta", p.ln2_beta});
    out.push_back({prefix + ".ff1.weight", p.ff1_w});
    out.push_back({prefix + ".ff1.bias", p.ff1_b});
    out.push_back({prefix + ".ff2.weight", p.ff2_w});
    out.push_back({prefix + ".ff2.bias", p.ff2_b});
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t dim = cfg_.dim;
    const std::size_t e_frame = 3 * cfg_.patch * cfg_.patch;
    const std::size_t e_sal = cfg_.patch * cfg_.patch;

    // precomputed once; covers the token axis (incl. task token) and d_t
    pe_ = positional_encoding<T>(std::max(cfg_.max_tokens() + 1, cfg_.d_t), dim);

    frame_embed_w_ = init_weight<T>({e_frame, dim}, rng);
    frame_embed_b_ = init_zeros<T>({dim});
    sal_embed_w_ = init_weight<T>({e_sal, dim}, rng);
    sal_embed_b_ = init_zeros<T>({dim});

    for (std::size_t i = 0; i < cfg_.stream_layers; ++i)
        frame_layers_.push_back(init_layer<T>(dim, cfg_.mlp_ratio, rng));
    for (std::size_t i = 0; i < cfg_.stream_layers; ++i)
        sal_layers_.push_back(init_layer<T>(dim, cfg_.mlp_ratio, rng));
    for (std::size_t i = 0; i < cfg_.multimodal_layers; ++i)
        mm_layers_.push_back(init_layer<T>(dim, cfg_.mlp_ratio, rng));

    const std::size_t c_dec = cfg_.decoder_channels;
    const std::size_t patch_px = c_dec * cfg_.patch * cfg_.patch;
    dec_proj_w_ = init_weight<T>({dim, patch_px}, rng);
    dec_proj_b_ = init_zeros<T>({patch_px});
    conv1_w_ = init_weight<T>({c_dec, c_dec, 3, 3}, rng);
    conv1_b_ = init_zeros<T>({c_dec});
    conv2_w_ = init_weight<T>({c_dec, c_dec, 3, 3}, rng);
    conv2_b_ = init_zeros<T>({c_dec});
    conv3_w_ = init_weight<T>({1, c_dec, 3, 3}, rng);
    conv3_b_ = init_zeros<T>({1});
}

template <typename T>
Tensor<T> Model<T>::embed_stream(const tok::TokenSequence<T>& tokens, bool saliency_stream) const {
    const Tensor<T>& w = saliency_stream ? sal_embed_w_ : frame_embed_w_;
    const Tensor<T>& b = saliency_stream ? sal_embed_b_ : frame_embed_b_;
    const std::size_t e = tokens.tokens.shape()[2];
    if (e != w.shape()[0])
        throw DimensionError(std::string("embed_stream: token width ") + std::to_string(e) +
                             " does not match " + (saliency_stream ? "saliency" : "frame") +
                             " embedding input " + std::to_string(w.shape()[0]));
    const std::size_t n = tokens.tokens.shape()[0];
    const std::size_t d_t = tokens.tokens.shape()[1];
    auto x = ops::add(ops::matmul(tokens.tokens, w), b);
    // token-position term broadcast over slots, slot term broadcast over tokens
    auto pe_token = ops::reshape(ops::slice(pe_, 0, 0, n), {n, std::size_t(1), cfg_.dim});
    auto pe_slot = ops::reshape(ops::slice(pe_, 0, 0, d_t), {std::size_t(1), d_t, cfg_.dim});
    return ops::add(ops::add(x, pe_token), pe_slot);
}

template <typename T>
ForwardResult<T> Model<T>::decode_head(const Tensor<T>& tokens, std::size_t gt, std::size_t gh,
                                       std::size_t gw) const {
    const std::size_t n_body = gt * gh * gw;
    if (tokens.ndim() != 3 || tokens.shape()[0] != n_body + 1)
        throw DimensionError("decode_head: expected task token plus " + std::to_string(n_body) +
                             " tubelet tokens, got " + shape_str(tokens.shape()));
    auto body = ops::slice(tokens, 0, 1, n_body);
    auto projected = ops::add(ops::matmul(body, dec_proj_w_), dec_proj_b_);
    tok::TokenSequence<T> seq;
    seq.tokens = projected;
    seq.gt = gt;
    seq.gh = gh;
    seq.gw = gw;
    seq.has_task_token = false;
    auto img = tok::reassemble_tokens(seq, cfg_.decoder_channels, gh * cfg_.patch,
                                      gw * cfg_.patch);
    auto h1 = ops::gelu(ops::conv2d(img, conv1_w_, conv1_b_));
    auto h2 = ops::gelu(ops::conv2d(h1, conv2_w_, conv2_b_));
    auto logits = ops::conv2d(h2, conv3_w_, conv3_b_);
    ForwardResult<T> res;
    res.logits = logits;
    res.probs = ops::sigmoid(logits);
    return res;
}

template <typename T>
ForwardResult<T> Model<T>::forward(const data::ClipSample<T>& clip) const {
    if (clip.frames.ndim() != 4 || clip.frames.shape()[1] != 3)
        throw DimensionError("forward: frames must be (d,3,H,W), got " +
                             shape_str(clip.frames.shape()));
    const std::size_t d = clip.frames.shape()[0];
    if (d == 0 || d % cfg_.d_t != 0 || d > cfg_.d_f)
        throw DimensionError("forward: clip depth " + std::to_string(d) +
                             " incompatible with d_f=" + std::to_string(cfg_.d_f) +
                             ", d_t=" + std::to_string(cfg_.d_t));
    if (clip.frames.shape()[2] != cfg_.input_height || clip.frames.shape()[3] != cfg_.input_width)
        throw DimensionError("forward: clip is " + shape_str(clip.frames.shape()) +
                             " but the model expects " + std::to_string(cfg_.input_height) + "x" +
                             std::to_string(cfg_.input_width));

    auto masked = tok::mask_frames(clip.frames, clip.prior_maps, cfg_.mask);
    auto frame_tokens = tok::prepend_task_token(tok::extract_tubelets(masked, cfg_.d_t, cfg_.patch),
                                                cfg_.task_id, cfg_.num_tasks);
    auto sal_tokens = tok::prepend_task_token(
        tok::extract_tubelets(clip.prior_maps, cfg_.d_t, cfg_.patch), cfg_.task_id,
        cfg_.num_tasks);

    auto fx = encoder_stream(embed_stream(frame_tokens, false), frame_layers_, cfg_.heads);
    auto sx = encoder_stream(embed_stream(sal_tokens, true), sal_layers_, cfg_.heads);
    auto fused = fuse_streams(fx, sx);
    auto z = encoder_stream(fused, mm_layers_, cfg_.heads);
    return decode_head(z, frame_tokens.gt, frame_tokens.gh, frame_tokens.gw);
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() const {
    std::vector<NamedParam<T>> out;
    out.push_back({"embed.frame.weight", frame_embed_w_});
    out.push_back({"embed.frame.bias", frame_embed_b_});
    out.push_back({"embed.saliency.weight", sal_embed_w_});
    out.push_back({"embed.saliency.bias", sal_embed_b_});
    for (std::size_t i = 0; i < frame_layers_.size(); ++i)
        collect_layer(out, "stream.frame." + std::to_string(i), frame_layers_[i]);
    for (std::size_t i = 0; i < sal_layers_.size(); ++i)
        collect_layer(out, "stream.saliency." + std::to_string(i), sal_layers_[i]);
    for (std::size_t i = 0; i < mm_layers_.size(); ++i)
        collect_layer(out, "multimodal." + std::to_string(i), mm_layers_[i]);
    out.push_back({"decoder.proj.weight", dec_proj_w_});
    out.push_back({"decoder.proj.bias", dec_proj_b_});
    out.push_back({"decoder.conv1.weight", conv1_w_});
    out.push_back({"decoder.conv1.bias", conv1_b_});
    out.push_back({"decoder.conv2.weight", conv2_w_});
    out.push_back({"decoder.conv2.bias", conv2_b_});
    out.push_back({"decoder.conv3.weight", conv3_w_});
    out.push_back({"decoder.conv3.bias", conv3_b_});
    return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

#define TUBESAL_INSTANTIATE_MODEL(T)                                                  \
    template struct EncoderLayerParams<T>;                                            \
    template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);              \
    template Tensor<T> attention_layer<T>(const Tensor<T>&, AttentionAxis,            \
                                          const EncoderLayerParams<T>&, std::size_t); \
    template Tensor<T> encoder_stream<T>(const Tensor<T>&,                            \
                                         const std::vector<EncoderLayerParams<T>>&,   \
                                         std::size_t);                                \
    template Tensor<T> fuse_streams<T>(const Tensor<T>&, const Tensor<T>&);           \
    template class Model<T>;
TUBESAL_INSTANTIATE_MODEL(float)
TUBESAL_INSTANTIATE_MODEL(double)
#undef TUBESAL_INSTANTIATE_MODEL

}  // namespace tubesal::model
