// SPDX-License-Identifier: Apache-2.0
#include "tubesal/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tubesal::image {

namespace {

struct Cursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    std::uint8_t peek() const { return bytes[pos]; }

    // Skips whitespace and '#' comment lines between header fields.
    void skip_separators() {
        while (!eof()) {
            const char c = char(bytes[pos]);
            if (c == '#') {
                while (!eof() && char(bytes[pos]) != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::size_t parse_uint(const char* field) {
        skip_separators();
        if (eof()) throw ParseError(std::string("netpbm: missing ") + field, pos);
        if (!std::isdigit(peek()))
            throw ParseError(std::string("netpbm: expected digit for ") + field, pos);
        std::size_t v = 0;
        while (!eof() && std::isdigit(peek())) {
            v = v * 10 + std::size_t(peek() - '0');
            ++pos;
        }
        return v;
    }
};

}  // namespace

Tensor<float> decode_image(const std::vector<std::uint8_t>& bytes) {
    Cursor cur{bytes};
    if (bytes.size() < 2) throw ParseError("netpbm: truncated magic", 0);
    const char m0 = char(bytes[0]), m1 = char(bytes[1]);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw ParseError(std::string("netpbm: unsupported magic \"") + m0 + m1 + "\"", 0);
    const std::size_t channels = (m1 == '6') ? 3 : 1;
    cur.pos = 2;

    const std::size_t w = cur.parse_uint("width");
    const std::size_t h = cur.parse_uint("height");
    const std::size_t maxval_pos = cur.pos;
    const std::size_t maxval = cur.parse_uint("maxval");
    if (maxval != 255)
        throw ParseError("netpbm: unsupported maxval " + std::to_string(maxval), maxval_pos);
    if (w == 0 || h == 0) throw ParseError("netpbm: zero image extent", cur.pos);

    // exactly one whitespace byte before the raster
    if (cur.eof()) throw ParseError("netpbm: missing raster", cur.pos);
    const char sep = char(bytes[cur.pos]);
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
        throw ParseError("netpbm: expected whitespace before raster", cur.pos);
    ++cur.pos;

    const std::size_t need = w * h * channels;
    if (bytes.size() - cur.pos < need)
        throw ParseError("netpbm: truncated raster, need " + std::to_string(need) +
                             " bytes, have " + std::to_string(bytes.size() - cur.pos),
                         cur.pos);

    Tensor<float> out{Shape{channels, h, w}};
    auto ov = out.values();
    const std::uint8_t* raster = bytes.data() + cur.pos;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                ov[(c * h + y) * w + x] = float(raster[(y * w + x) * channels + c]) / 255.0f;
    return out;
}

std::vector<std::uint8_t> encode_image(const Tensor<float>& img, const std::string& comment) {
    if (img.ndim() != 3 || (img.shape()[0] != 1 && img.shape()[0] != 3))
        throw DimensionError("encode_image: expected (1,h,w) or (3,h,w), got " +
                             shape_str(img.shape()));
    const std::size_t c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    std::string header = (c == 3) ? "P6\n" : "P5\n";
    if (!comment.empty()) header += "# " + comment + "\n";
    header += std::to_string(w) + " " + std::to_string(h) + "\n255\n";

    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + c * h * w);
    auto iv = img.values();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const float v = std::clamp(iv[(ch * h + y) * w + x], 0.0f, 1.0f);
                bytes.push_back(std::uint8_t(std::lround(255.0f * v)));
            }
    return bytes;
}

Tensor<float> read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_image: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

void write_image(const std::filesystem::path& path, const Tensor<float>& img,
                 const std::string& comment) {
    auto bytes = encode_image(img, comment);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_image: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write_image: short write to " + path.string());
}

Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t out_h, std::size_t out_w) {
    if (img.ndim() != 3)
        throw DimensionError("resize_bilinear: expected (c,h,w), got " + shape_str(img.shape()));
    if (out_h == 0 || out_w == 0) throw DomainError("resize_bilinear: target extents must be >= 1");
    const std::size_t c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (out_h == h && out_w == w) return img.clone();

    Tensor<float> out{Shape{c, out_h, out_w}};
    auto src = img.values();
    auto dst = out.values();
    const double sy = double(h) / double(out_h);
    const double sx = double(w) / double(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double fy = (double(y) + 0.5) * sy - 0.5;
        const double cy = std::clamp(fy, 0.0, double(h - 1));
        const std::size_t y0 = std::size_t(cy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = cy - double(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double fx = (double(x) + 0.5) * sx - 0.5;
            const double cx = std::clamp(fx, 0.0, double(w - 1));
            const std::size_t x0 = std::size_t(cx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = cx - double(x0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const auto px = [&](std::size_t yy, std::size_t xx) {
                    return double(src[(ch * h + yy) * w + xx]);
                };
                const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
                const double bot = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
                dst[(ch * out_h + y) * out_w + x] = float(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    return out;
}

}  // namespace tubesal::image
