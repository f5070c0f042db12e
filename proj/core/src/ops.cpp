// SPDX-License-Identifier: Apache-2.0
#include "tubesal/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace tubesal::ops {

namespace {

template <typename T>
using RMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RMat<T>>;
template <typename T>
using MapConst = Eigen::Map<const RMat<T>>;

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const std::size_t n = std::max(a.size(), b.size());
    Shape out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ea = i < n - a.size() ? 1 : a[i - (n - a.size())];
        const std::size_t eb = i < n - b.size() ? 1 : b[i - (n - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw DimensionError(std::string(op) + ": shapes not broadcastable: " +
                                 shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Strides of `s` under the broadcast output shape `out` (0 on expanded axes).
std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
    auto st = row_major_strides(s);
    std::vector<std::size_t> bs(out.size(), 0);
    const std::size_t off = out.size() - s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
        bs[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : st[i];
    return bs;
}

// Walks the output shape in row-major order keeping two strided offsets in
// sync; f(out_linear, a_offset, b_offset).
template <typename F>
void for_each_strided(const Shape& out, const std::vector<std::size_t>& sa,
                      const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t n = shape_numel(out);
    const std::size_t rank = out.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ao = 0, bo = 0;
    for (std::size_t lin = 0; lin < n; ++lin) {
        f(lin, ao, bo);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ao += sa[d];
            bo += sb[d];
            if (idx[d] < out[d]) break;
            ao -= sa[d] * out[d];
            bo -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

template <typename T, typename Fwd, typename Da, typename Db>
Tensor<T> ew_binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd,
                    Da da_of, Db db_of) {
    const Shape os = broadcast_shapes(a.shape(), b.shape(), name);
    Tensor<T> out{Shape(os)};
    const auto sa = broadcast_strides(a.shape(), os);
    const auto sb = broadcast_strides(b.shape(), os);
    {
        auto av = a.values();
        auto bv = b.values();
        auto ov = out.values();
        for_each_strided(os, sa, sb, [&](std::size_t lin, std::size_t ao, std::size_t bo) {
            ov[lin] = fwd(av[ao], bv[bo]);
        });
    }
    auto* tape = Tape<T>::current();
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out, os, sa, sb, da_of, db_of]() mutable {
            auto go = out.grad();
            auto av = a.values();
            auto bv = b.values();
            std::span<T> ga, gb;
            if (a.requires_grad()) ga = a.grad();
            if (b.requires_grad()) gb = b.grad();
            for_each_strided(os, sa, sb, [&](std::size_t lin, std::size_t ao, std::size_t bo) {
                const T g = go[lin];
                if (!ga.empty()) ga[ao] += da_of(g, av[ao], bv[bo]);
                if (!gb.empty()) gb[bo] += db_of(g, av[ao], bv[bo]);
            });
        });
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return ew_binary<T>(
        "add", a, b, [](T x, T y) { return x + y; },
        [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return ew_binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; },
        [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return ew_binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; },
        [](T g, T, T y) { return g * y; }, [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out{Shape(a.shape())};
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * s;
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out, s]() mutable {
            auto go = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
        });
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    Tensor<T> out{Shape(a.shape())};
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + s;
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out]() mutable {
            auto go = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() < 2 || b.ndim() < 2)
        throw DimensionError("matmul: inputs must have rank >= 2: " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    const std::size_t m = a.shape()[a.ndim() - 2];
    const std::size_t k = a.shape()[a.ndim() - 1];
    const std::size_t kb = b.shape()[b.ndim() - 2];
    const std::size_t n = b.shape()[b.ndim() - 1];
    if (k != kb)
        throw DimensionError("matmul: inner extents mismatch: " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    const Shape abatch(a.shape().begin(), a.shape().end() - 2);
    const Shape bbatch(b.shape().begin(), b.shape().end() - 2);
    const Shape obatch = broadcast_shapes(abatch, bbatch, "matmul");
    Shape oshape = obatch;
    oshape.push_back(m);
    oshape.push_back(n);
    Tensor<T> out{std::move(oshape)};

    const auto sa = broadcast_strides(abatch, obatch);
    const auto sb = broadcast_strides(bbatch, obatch);
    const std::size_t amat = m * k, bmat = k * n, omat = m * n;
    {
        auto av = a.values();
        auto bv = b.values();
        auto ov = out.values();
        for_each_strided(obatch, sa, sb, [&](std::size_t lin, std::size_t ao, std::size_t bo) {
            MapConst<T> A(av.data() + ao * amat, m, k);
            MapConst<T> B(bv.data() + bo * bmat, k, n);
            MapMat<T> C(ov.data() + lin * omat, m, n);
            C.noalias() = A * B;
        });
    }
    auto* tape = Tape<T>::current();
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out, obatch, sa, sb, m, k, n, amat, bmat, omat]() mutable {
            auto av = a.values();
            auto bv = b.values();
            auto go = out.grad();
            std::span<T> ga, gb;
            if (a.requires_grad()) ga = a.grad();
            if (b.requires_grad()) gb = b.grad();
            for_each_strided(obatch, sa, sb, [&](std::size_t lin, std::size_t ao, std::size_t bo) {
                MapConst<T> Go(go.data() + lin * omat, m, n);
                if (!ga.empty()) {
                    MapConst<T> B(bv.data() + bo * bmat, k, n);
                    MapMat<T> Ga(ga.data() + ao * amat, m, k);
                    Ga.noalias() += Go * B.transpose();
                }
                if (!gb.empty()) {
                    MapConst<T> A(av.data() + ao * amat, m, k);
                    MapMat<T> Gb(gb.data() + bo * bmat, k, n);
                    Gb.noalias() += A.transpose() * Go;
                }
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.numel())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(new_shape));
    auto av = a.values();
    Tensor<T> out = Tensor<T>::from(std::move(new_shape), std::vector<T>(av.begin(), av.end()));
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out]() mutable {
            auto go = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
    const std::size_t rank = a.ndim();
    if (axes.size() != rank)
        throw DimensionError("permute: got " + std::to_string(axes.size()) + " axes for shape " +
                             shape_str(a.shape()));
    std::vector<bool> seen(rank, false);
    for (auto ax : axes) {
        if (ax >= rank || seen[ax])
            throw DimensionError("permute: axes are not a permutation of 0.." +
                                 std::to_string(rank - 1));
        seen[ax] = true;
    }
    Shape oshape(rank);
    const auto astr = row_major_strides(a.shape());
    std::vector<std::size_t> src_strides(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        oshape[i] = a.shape()[axes[i]];
        src_strides[i] = astr[axes[i]];
    }
    Tensor<T> out{Shape(oshape)};
    const std::vector<std::size_t> zero(rank, 0);
    {
        auto av = a.values();
        auto ov = out.values();
        for_each_strided(oshape, src_strides, zero,
                         [&](std::size_t lin, std::size_t so, std::size_t) { ov[lin] = av[so]; });
    }
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out, oshape, src_strides, zero]() mutable {
            auto go = out.grad();
            auto ga = a.grad();
            for_each_strided(oshape, src_strides, zero,
                             [&](std::size_t lin, std::size_t so, std::size_t) { ga[so] += go[lin]; });
        });
    }
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
    if (axis >= a.ndim())
        throw DimensionError("slice: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(a.shape()));
    const std::size_t ext = a.shape()[axis];
    if (len == 0 || start + len > ext)
        throw RangeError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") exceeds extent " + std::to_string(ext));
    Shape oshape = a.shape();
    oshape[axis] = len;
    Tensor<T> out{Shape(oshape)};
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (std::size_t i = axis + 1; i < a.ndim(); ++i) inner *= a.shape()[i];
    {
        auto av = a.values();
        auto ov = out.values();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < len; ++j)
                std::copy_n(av.data() + ((o * ext) + start + j) * inner, inner,
                            ov.data() + ((o * len) + j) * inner);
    }
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out, outer, inner, ext, start, len]() mutable {
            auto go = out.grad();
            auto ga = a.grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < len; ++j) {
                    const T* src = go.data() + ((o * len) + j) * inner;
                    T* dst = ga.data() + ((o * ext) + start + j) * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                }
        });
    }
    return out;
}

namespace {

// Iterates 1-d slices along `axis`: f(base_offset, stride) once per slice.
template <typename F>
void for_each_lane(const Shape& shape, std::size_t axis, F&& f) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t ext = shape[axis];
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) f(o * ext * inner + i, inner);
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
    if (axis >= a.ndim())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(a.shape()));
    const std::size_t L = a.shape()[axis];
    Tensor<T> out{Shape(a.shape())};
    {
        auto av = a.values();
        auto ov = out.values();
        for_each_lane(a.shape(), axis, [&](std::size_t base, std::size_t stride) {
            T mx = av[base];
            for (std::size_t k = 1; k < L; ++k) mx = std::max(mx, av[base + k * stride]);
            double denom = 0.0;
            for (std::size_t k = 0; k < L; ++k) {
                const T e = std::exp(av[base + k * stride] - mx);
                ov[base + k * stride] = e;
                denom += double(e);
            }
            const T inv = T(1.0 / denom);
            for (std::size_t k = 0; k < L; ++k) ov[base + k * stride] *= inv;
        });
    }
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        const Shape shape = a.shape();
        tape->record([a = a, out = out, shape, axis, L]() mutable {
            auto yv = out.values();
            auto go = out.grad();
            auto ga = a.grad();
            for_each_lane(shape, axis, [&](std::size_t base, std::size_t stride) {
                double dot = 0.0;
                for (std::size_t k = 0; k < L; ++k)
                    dot += double(go[base + k * stride]) * double(yv[base + k * stride]);
                for (std::size_t k = 0; k < L; ++k) {
                    const std::size_t p = base + k * stride;
                    ga[p] += yv[p] * (go[p] - T(dot));
                }
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::size_t axis, T eps) {
    if (axis >= x.ndim())
        throw DimensionError("layer_norm: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(x.shape()));
    const std::size_t L = x.shape()[axis];
    if (gamma.ndim() != 1 || gamma.numel() != L || beta.ndim() != 1 || beta.numel() != L)
        throw DimensionError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
                             shape_str(beta.shape()) + " do not match normalized extent " +
                             std::to_string(L));
    Tensor<T> out{Shape(x.shape())};
    {
        auto xv = x.values();
        auto gv = gamma.values();
        auto bv = beta.values();
        auto ov = out.values();
        for_each_lane(x.shape(), axis, [&](std::size_t base, std::size_t stride) {
            double mean = 0.0;
            for (std::size_t k = 0; k < L; ++k) mean += double(xv[base + k * stride]);
            mean /= double(L);
            double var = 0.0;
            for (std::size_t k = 0; k < L; ++k) {
                const double d = double(xv[base + k * stride]) - mean;
                var += d * d;
            }
            var /= double(L);
            const double inv_std = 1.0 / std::sqrt(var + double(eps));
            for (std::size_t k = 0; k < L; ++k) {
                const std::size_t p = base + k * stride;
                const T xhat = T((double(xv[p]) - mean) * inv_std);
                ov[p] = gv[k] * xhat + bv[k];
            }
        });
    }
    auto* tape = Tape<T>::current();
    if (tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        out.set_requires_grad(true);
        const Shape shape = x.shape();
        tape->record([x = x, gamma = gamma, beta = beta, out = out, shape, axis, L, eps]() mutable {
            auto xv = x.values();
            auto gv = gamma.values();
            auto go = out.grad();
            std::span<T> gx, gg, gb;
            if (x.requires_grad()) gx = x.grad();
            if (gamma.requires_grad()) gg = gamma.grad();
            if (beta.requires_grad()) gb = beta.grad();
            std::vector<double> xhat(L);
            for_each_lane(shape, axis, [&](std::size_t base, std::size_t stride) {
                double mean = 0.0;
                for (std::size_t k = 0; k < L; ++k) mean += double(xv[base + k * stride]);
                mean /= double(L);
                double var = 0.0;
                for (std::size_t k = 0; k < L; ++k) {
                    const double d = double(xv[base + k * stride]) - mean;
                    var += d * d;
                }
                var /= double(L);
                const double inv_std = 1.0 / std::sqrt(var + double(eps));
                for (std::size_t k = 0; k < L; ++k)
                    xhat[k] = (double(xv[base + k * stride]) - mean) * inv_std;
                double sum_gy = 0.0, sum_gy_xhat = 0.0;
                for (std::size_t k = 0; k < L; ++k) {
                    const double gyk = double(go[base + k * stride]) * double(gv[k]);
                    sum_gy += gyk;
                    sum_gy_xhat += gyk * xhat[k];
                }
                for (std::size_t k = 0; k < L; ++k) {
                    const std::size_t p = base + k * stride;
                    if (!gx.empty()) {
                        const double gyk = double(go[p]) * double(gv[k]);
                        gx[p] += T(inv_std * (gyk - sum_gy / double(L) -
                                              xhat[k] * sum_gy_xhat / double(L)));
                    }
                    if (!gg.empty()) gg[k] += T(double(go[p]) * xhat[k]);
                    if (!gb.empty()) gb[k] += go[p];
                }
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out{Shape(x.shape())};
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    {
        auto xv = x.values();
        auto ov = out.values();
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double v = double(xv[i]);
            ov[i] = T(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
        }
    }
    auto* tape = Tape<T>::current();
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([x = x, out = out]() mutable {
            constexpr double inv_sqrt2pi = 0.39894228040143267794;
            auto xv = x.values();
            auto go = out.grad();
            auto gx = x.grad();
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const double v = double(xv[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                gx[i] += T(double(go[i]) * (cdf + v * pdf));
            }
        });
    }
    return out;
}

namespace {

template <typename T>
T stable_sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out{Shape(x.shape())};
    {
        auto xv = x.values();
        auto ov = out.values();
        for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = stable_sigmoid(xv[i]);
    }
    auto* tape = Tape<T>::current();
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([x = x, out = out]() mutable {
            auto yv = out.values();
            auto go = out.grad();
            auto gx = x.grad();
            for (std::size_t i = 0; i < yv.size(); ++i)
                gx[i] += go[i] * yv[i] * (T(1) - yv[i]);
        });
    }
    return out;
}

namespace {

// (cin*9, h*w) patch matrix for a single (cin,h,w) image, zero padding 1.
template <typename T>
void im2col3x3(const T* img, std::size_t cin, std::size_t h, std::size_t w, T* col) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < cin; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = col + ((c * 9) + std::size_t(ky * 3 + kx)) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = long(y) + ky - 1;
                    if (sy < 0 || sy >= long(h)) {
                        std::fill_n(row + y * w, w, T(0));
                        continue;
                    }
                    const T* src = img + c * hw + std::size_t(sy) * w;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = long(x) + kx - 1;
                        row[y * w + x] = (sx < 0 || sx >= long(w)) ? T(0) : src[sx];
                    }
                }
            }
        }
    }
}

// Scatter-add of the patch matrix gradient back onto the padded image.
template <typename T>
void col2im3x3(const T* col, std::size_t cin, std::size_t h, std::size_t w, T* img) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < cin; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = col + ((c * 9) + std::size_t(ky * 3 + kx)) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = long(y) + ky - 1;
                    if (sy < 0 || sy >= long(h)) continue;
                    T* dst = img + c * hw + std::size_t(sy) * w;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = long(x) + kx - 1;
                        if (sx < 0 || sx >= long(w)) continue;
                        dst[sx] += row[y * w + x];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias) {
    if (x.ndim() != 4 || kernel.ndim() != 4)
        throw DimensionError("conv2d: expected x rank 4 and kernel rank 4, got " +
                             shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
    const std::size_t b = x.shape()[0], cin = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::size_t cout = kernel.shape()[0];
    if (kernel.shape()[2] != 3 || kernel.shape()[3] != 3)
        throw DimensionError("conv2d: kernel spatial size must be 3x3, got " +
                             shape_str(kernel.shape()));
    if (kernel.shape()[1] != cin)
        throw DimensionError("conv2d: channel mismatch: input " + shape_str(x.shape()) +
                             " vs kernel " + shape_str(kernel.shape()));
    if (bias.ndim() != 1 || bias.numel() != cout)
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                             std::to_string(cout) + " output channels");
    const std::size_t hw = h * w, krows = cin * 9;
    Tensor<T> out{Shape{b, cout, h, w}};
    std::vector<T> col(krows * hw);
    {
        auto xv = x.values();
        auto kv = kernel.values();
        auto bv = bias.values();
        auto ov = out.values();
        MapConst<T> K(kv.data(), cout, krows);
        for (std::size_t i = 0; i < b; ++i) {
            im2col3x3(xv.data() + i * cin * hw, cin, h, w, col.data());
            MapConst<T> C(col.data(), krows, hw);
            MapMat<T> O(ov.data() + i * cout * hw, cout, hw);
            O.noalias() = K * C;
            for (std::size_t c = 0; c < cout; ++c) O.row(c).array() += bv[c];
        }
    }
    auto* tape = Tape<T>::current();
    if (tape && (x.requires_grad() || kernel.requires_grad() || bias.requires_grad())) {
        out.set_requires_grad(true);
        tape->record([x = x, kernel = kernel, bias = bias, out = out, b, cin, cout, h, w, hw, krows]() mutable {
            auto xv = x.values();
            auto kv = kernel.values();
            auto go = out.grad();
            std::vector<T> col(krows * hw), dcol(krows * hw);
            MapConst<T> K(kv.data(), cout, krows);
            for (std::size_t i = 0; i < b; ++i) {
                MapConst<T> Go(go.data() + i * cout * hw, cout, hw);
                if (x.requires_grad() || kernel.requires_grad())
                    im2col3x3(xv.data() + i * cin * hw, cin, h, w, col.data());
                if (kernel.requires_grad()) {
                    MapConst<T> C(col.data(), krows, hw);
                    MapMat<T> Gk(kernel.grad().data(), cout, krows);
                    Gk.noalias() += Go * C.transpose();
                }
                if (bias.requires_grad()) {
                    auto gb = bias.grad();
                    for (std::size_t c = 0; c < cout; ++c) gb[c] += Go.row(c).sum();
                }
                if (x.requires_grad()) {
                    MapMat<T> Dc(dcol.data(), krows, hw);
                    Dc.noalias() = K.transpose() * Go;
                    col2im3x3(dcol.data(), cin, h, w, x.grad().data() + i * cin * hw);
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape())
        throw DimensionError("sigmoid_bce: shape mismatch: " + shape_str(logits.shape()) +
                             " vs " + shape_str(targets.shape()));
    auto zv = logits.values();
    auto tv = targets.values();
    for (std::size_t i = 0; i < tv.size(); ++i)
        if (!(tv[i] >= T(0) && tv[i] <= T(1)))
            throw DomainError("sigmoid_bce: target value " + std::to_string(double(tv[i])) +
                              " outside [0,1] at index " + std::to_string(i));
    const std::size_t n = zv.size();
    double acc = 0.0, comp = 0.0;  // Kahan
    for (std::size_t i = 0; i < n; ++i) {
        const double z = double(zv[i]);
        const double t = double(tv[i]);
        const double term = std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        const double y = term - comp;
        const double s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    Tensor<T> out = Tensor<T>::from(Shape{}, {T(acc / double(n))});
    auto* tape = Tape<T>::current();
    if (tape && logits.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([logits = logits, targets = targets, out = out, n]() mutable {
            const T g = out.grad()[0];
            auto zv = logits.values();
            auto tv = targets.values();
            auto gz = logits.grad();
            const T invn = T(1) / T(n);
            for (std::size_t i = 0; i < n; ++i)
                gz[i] += g * (stable_sigmoid(zv[i]) - tv[i]) * invn;
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    auto av = a.values();
    double acc = 0.0, comp = 0.0;
    for (auto v : av) {
        const double y = double(v) - comp;
        const double s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    Tensor<T> out = Tensor<T>::from(Shape{}, {T(acc)});
    auto* tape = Tape<T>::current();
    if (tape && a.requires_grad()) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out]() mutable {
            const T g = out.grad()[0];
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    Tensor<T> s = sum(a);
    return scale(s, T(1) / T(a.numel()));
}

#define TUBESAL_INSTANTIATE_OPS(T)                                                        \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                     \
    template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                     \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                               \
    template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::size_t>&);     \
    template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t); \
    template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                         \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, T); \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                         \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                      \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
    template Tensor<T> sigmoid_bce<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> sum<T>(const Tensor<T>&);                                          \
    template Tensor<T> mean<T>(const Tensor<T>&);

TUBESAL_INSTANTIATE_OPS(float)
TUBESAL_INSTANTIATE_OPS(double)
#undef TUBESAL_INSTANTIATE_OPS

}  // namespace tubesal::ops
