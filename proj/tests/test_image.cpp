#include <doctest.h>

#include "test_util.hpp"
#include "tubesal/image.hpp"

using namespace tubesal;
using tubesal::image::decode_image;
using tubesal::image::encode_image;
using tubesal::image::resize_bilinear;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("pgm decode: maxval normalization") {
    auto b = bytes_of("P5\n2 1\n255\n");
    b.push_back(255);
    b.push_back(0);
    auto img = decode_image(b);
    CHECK(img.shape() == Shape{1, 1, 2});
    CHECK(img.at({0, 0, 0}) == 1.0f);
    CHECK(img.at({0, 0, 1}) == 0.0f);
}

TEST_CASE("ppm decode: channel-major layout with comments") {
    auto b = bytes_of("P6\n# a comment\n1 2\n255\n");
    // pixel (0,0) = (10,20,30), pixel (0,1) = (40,50,60)
    for (std::uint8_t v : {10, 20, 30, 40, 50, 60}) b.push_back(v);
    auto img = decode_image(b);
    CHECK(img.shape() == Shape{3, 2, 1});
    CHECK(img.at({0, 0, 0}) == doctest::Approx(10.0 / 255));
    CHECK(img.at({1, 0, 0}) == doctest::Approx(20.0 / 255));
    CHECK(img.at({2, 1, 0}) == doctest::Approx(60.0 / 255));
}

TEST_CASE("decode errors carry byte offsets") {
    CHECK_THROWS_AS(decode_image(bytes_of("P7\n1 1\n255\n ")), ParseError);
    try {
        decode_image(bytes_of("P7\n1 1\n255\n "));
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
        CHECK(std::string(e.what()).find("P7") != std::string::npos);
    }

    auto truncated = bytes_of("P5\n4 4\n255\n");
    truncated.push_back(1);  // needs 16 raster bytes
    CHECK_THROWS_AS(decode_image(truncated), ParseError);

    CHECK_THROWS_AS(decode_image(bytes_of("P5\n2 2\n65535\n")), ParseError);
    CHECK_THROWS_AS(decode_image(bytes_of("P5\n2\n")), ParseError);
}

TEST_CASE("encode/decode round trip on canonical files") {
    Rng rng(71);
    // canonical gray file
    auto gray = testutil::random_tensor<float>({1, 5, 7}, rng, 0.0, 1.0);
    auto enc = encode_image(gray);
    auto dec = decode_image(enc);
    auto enc2 = encode_image(dec);
    CHECK(enc == enc2);  // byte-for-byte

    // quantization bound: |decode(encode(x)) - x| <= 0.5/255
    for (std::size_t i = 0; i < gray.numel(); ++i)
        CHECK(std::abs(dec.values()[i] - gray.values()[i]) <= 0.5f / 255.0f + 1e-6f);

    auto rgb = testutil::random_tensor<float>({3, 4, 4}, rng, 0.0, 1.0);
    auto enc_rgb = encode_image(rgb);
    CHECK(encode_image(decode_image(enc_rgb)) == enc_rgb);
}

TEST_CASE("encode supports a comment line that decode skips") {
    auto img = Tensor<float>::full({1, 2, 2}, 0.5f);
    auto enc = encode_image(img, "round(255*p)");
    const std::string header(enc.begin(), enc.begin() + 20);
    CHECK(header.find("# round(255*p)") != std::string::npos);
    auto dec = decode_image(enc);
    CHECK(dec.shape() == Shape{1, 2, 2});
    CHECK(dec.at({0, 1, 1}) == doctest::Approx(128.0 / 255));
}

TEST_CASE("resize: identity, constants, half-pixel average") {
    Rng rng(73);
    auto img = testutil::random_tensor<float>({3, 6, 5}, rng, 0.0, 1.0);
    CHECK(testutil::bits_equal(resize_bilinear(img, 6, 5), img));

    auto flat = Tensor<float>::full({1, 3, 3}, 0.42f);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{7, 2}, {1, 9}, {16, 16}}) {
        auto r = resize_bilinear(flat, h, w);
        for (auto v : r.values()) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
    }

    auto checker = Tensor<float>::from({1, 2, 2}, {0.f, 1.f, 1.f, 0.f});
    auto one = resize_bilinear(checker, 1, 1);
    CHECK(one.at({0, 0, 0}) == doctest::Approx(0.5f));

    CHECK_THROWS_AS(resize_bilinear(flat, 0, 3), DomainError);
}
