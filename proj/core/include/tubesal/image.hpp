// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tubesal/tensor.hpp"

namespace tubesal::image {

/// Decodes binary PPM (P6, 3-channel) or PGM (P5, 1-channel) with maxval
/// 255 into a (c,h,w) tensor in [0,1]. Malformed input raises ParseError
/// carrying the byte offset.
Tensor<float> decode_image(const std::vector<std::uint8_t>& bytes);

/// Encodes a (3,h,w) tensor as canonical P6 or a (1,h,w) tensor as canonical
/// P5, maxval 255, pixel = round(255 * clamp(v, 0, 1)). An optional comment
/// line is written after the magic.
std::vector<std::uint8_t> encode_image(const Tensor<float>& img,
                                       const std::string& comment = "");

Tensor<float> read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor<float>& img,
                 const std::string& comment = "");

/// Bilinear resize with half-pixel-center alignment; (c,h,w) -> (c,H,W).
Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t out_h, std::size_t out_w);

}  // namespace tubesal::image
