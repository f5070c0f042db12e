#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tubesal/gradcheck.hpp"
#include "tubesal/ops.hpp"

using namespace tubesal;
using testutil::random_tensor;

namespace {

// Convenience: scalarize an arbitrary-output op through a fixed random
// projection so grad_check sees a scalar loss with dense sensitivity.
template <typename T>
Tensor<T> project(const Tensor<T>& y, const Tensor<T>& weights) {
    return ops::sum(ops::mul(y, weights));
}

}  // namespace

TEST_CASE("matmul identity and hand-expanded 2x2") {
    auto I = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    auto A = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto IA = ops::matmul(I, A);
    CHECK(testutil::bits_equal(IA, A));

    auto B = Tensor<double>::from({2, 2}, {5, 6, 7, 8});
    auto C = ops::matmul(A, B);
    CHECK(C.at({0, 0}) == 19.0);
    CHECK(C.at({0, 1}) == 22.0);
    CHECK(C.at({1, 0}) == 43.0);
    CHECK(C.at({1, 1}) == 50.0);
}

TEST_CASE("matmul inner mismatch names both shapes") {
    auto a = Tensor<double>{Shape{2, 3}};
    auto b = Tensor<double>{Shape{4, 5}};
    try {
        ops::matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(4,5)") != std::string::npos);
    }
}

TEST_CASE("matmul batch broadcasting") {
    Rng rng(11);
    auto a = random_tensor<double>({3, 2, 4}, rng);   // batch 3
    auto b = random_tensor<double>({4, 5}, rng);      // broadcast over batch
    auto c = ops::matmul(a, b);
    CHECK(c.shape() == Shape{3, 2, 5});
    // per-batch check against rank-2 matmul
    for (std::size_t i = 0; i < 3; ++i) {
        auto ai = ops::slice(a, 0, i, 1);
        auto ci = ops::matmul(ops::reshape(ai, {2, 4}), b);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t col = 0; col < 5; ++col)
                CHECK(c.at({i, r, col}) == doctest::Approx(ci.at({r, col})).epsilon(1e-12));
    }
}

TEST_CASE("softmax uniform, derived values, properties") {
    auto u = ops::softmax(Tensor<double>::from({3}, {2.2, 2.2, 2.2}), 0);
    for (auto v : u.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    auto s = ops::softmax(Tensor<double>::from({2}, {0.0, std::log(2.0)}), 0);
    CHECK(s.at({0}) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(s.at({1}) == doctest::Approx(2.0 / 3).epsilon(1e-12));

    // shift invariance + rows sum to 1 + nonneg, random shapes/axes
    Rng rng(5);
    for (int it = 0; it < 10; ++it) {
        auto x = random_tensor<double>({4, 6}, rng, -3, 3);
        std::size_t axis = it % 2;
        auto y = ops::softmax(x, axis);
        auto xs = ops::add_scalar(x, 13.5);
        auto ys = ops::softmax(xs, axis);
        CHECK(testutil::max_abs_diff(y, ys) < 1e-12);
        for (auto v : y.values()) CHECK(v >= 0.0);
        const std::size_t lanes = x.numel() / x.shape()[axis];
        std::vector<double> sums(lanes, 0.0);
        // sum along axis
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 6; ++c) {
                const double v = y.at({r, c});
                if (axis == 0)
                    sums[c] += v;
                else
                    sums[r] += v;
            }
        sums.resize(axis == 0 ? 6 : 4);
        for (auto v : sums) CHECK(std::abs(v - 1.0) < 1e-9);
    }
}

TEST_CASE("layer_norm examples") {
    auto gamma = Tensor<double>::from({2}, {1.0, 1.0});
    auto beta = Tensor<double>::from({2}, {0.0, 0.0});

    auto constant = ops::layer_norm(Tensor<double>::from({2}, {5.0, 5.0}), gamma, beta, 0);
    CHECK(constant.at({0}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(constant.at({1}) == doctest::Approx(0.0).epsilon(1e-9));

    auto two = ops::layer_norm(Tensor<double>::from({2}, {1.0, 3.0}), gamma, beta, 0);
    CHECK(two.at({0}) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(two.at({1}) == doctest::Approx(1.0).epsilon(1e-4));

    auto g0 = Tensor<double>::from({2}, {0.0, 0.0});
    auto b7 = Tensor<double>::from({2}, {7.0, 7.0});
    auto only_beta = ops::layer_norm(Tensor<double>::from({2}, {1.0, 3.0}), g0, b7, 0);
    CHECK(only_beta.at({0}) == 7.0);
    CHECK(only_beta.at({1}) == 7.0);
}

TEST_CASE("layer_norm statistics invariant") {
    Rng rng(17);
    for (int it = 0; it < 10; ++it) {
        const std::size_t L = 16;
        auto x = random_tensor<double>({3, L}, rng, -5, 5);
        auto gamma = Tensor<double>::full({L}, 1.0);
        auto beta = Tensor<double>::zeros({L});
        auto y = ops::layer_norm(x, gamma, beta, 1);
        for (std::size_t r = 0; r < 3; ++r) {
            double mean = 0.0, var = 0.0;
            for (std::size_t c = 0; c < L; ++c) mean += y.at({r, c});
            mean /= L;
            for (std::size_t c = 0; c < L; ++c) {
                const double d = y.at({r, c}) - mean;
                var += d * d;
            }
            var /= L;
            CHECK(std::abs(mean) < 1e-7);
            CHECK(std::abs(var - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("gelu anchor values and monotonicity") {
    auto y0 = ops::gelu(Tensor<double>::from({1}, {0.0}));
    CHECK(y0.at({0}) == 0.0);

    // Phi(1) from the erf oracle: 0.5*(1+erf(1/sqrt 2))
    const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    auto y1 = ops::gelu(Tensor<double>::from({1}, {1.0}));
    CHECK(y1.at({0}) == doctest::Approx(phi1).epsilon(1e-12));
    CHECK(y1.at({0}) == doctest::Approx(0.841345).epsilon(1e-5));

    auto y10 = ops::gelu(Tensor<double>::from({1}, {10.0}));
    CHECK(std::abs(y10.at({0}) - 10.0) < 1e-6);

    // x * Phi(x) is nondecreasing from its minimum near x ~ -0.7518 upward
    double prev = -1e300;
    for (double x = -0.7; x <= 6.0; x += 0.01) {
        auto y = ops::gelu(Tensor<double>::from({1}, {x}));
        CHECK(y.at({0}) >= prev - 1e-12);
        prev = y.at({0});
    }
}

TEST_CASE("conv2d identity kernel, window sums, channel mismatch") {
    Rng rng(23);
    auto x = random_tensor<double>({1, 2, 5, 5}, rng);
    auto delta = Tensor<double>::zeros({2, 2, 3, 3});
    delta.at({0, 0, 1, 1}) = 1.0;
    delta.at({1, 1, 1, 1}) = 1.0;
    auto bias = Tensor<double>::zeros({2});
    auto y = ops::conv2d(x, delta, bias);
    CHECK(testutil::max_abs_diff(y, x) == 0.0);

    auto ones_in = Tensor<double>::full({1, 1, 4, 4}, 1.0);
    auto ones_k = Tensor<double>::full({1, 1, 3, 3}, 1.0);
    auto b0 = Tensor<double>::zeros({1});
    auto s = ops::conv2d(ones_in, ones_k, b0);
    CHECK(s.at({0, 0, 1, 1}) == 9.0);  // interior: full window
    CHECK(s.at({0, 0, 0, 0}) == 4.0);  // corner: zero-padded window
    CHECK(s.at({0, 0, 0, 1}) == 6.0);  // edge

    auto bad_k = Tensor<double>::zeros({1, 3, 3, 3});
    CHECK_THROWS_AS(ops::conv2d(ones_in, bad_k, b0), DimensionError);
}

TEST_CASE("sigmoid_bce values, symmetry, domain error") {
    auto z0 = Tensor<double>::from({1}, {0.0});
    auto t1 = Tensor<double>::from({1}, {1.0});
    CHECK(ops::sigmoid_bce(z0, t1).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    auto z40 = Tensor<double>::from({1}, {40.0});
    CHECK(ops::sigmoid_bce(z40, t1).item() < 1e-9);

    Rng rng(29);
    auto z = random_tensor<double>({8}, rng, -4, 4);
    auto t = random_tensor<double>({8}, rng, 0, 1);
    auto zneg = ops::scale(z, -1.0);
    Tensor<double> tflip{Shape{8}};
    for (std::size_t i = 0; i < 8; ++i) tflip.values()[i] = 1.0 - t.values()[i];
    CHECK(ops::sigmoid_bce(z, t).item() ==
          doctest::Approx(ops::sigmoid_bce(zneg, tflip).item()).epsilon(1e-12));

    auto bad = Tensor<double>::from({1}, {1.5});
    CHECK_THROWS_AS(ops::sigmoid_bce(z0, bad), DomainError);
    CHECK_THROWS_AS(ops::sigmoid_bce(z, t1), DimensionError);
}

TEST_CASE("elementwise broadcasting and reductions stay finite") {
    Rng rng(31);
    auto a = random_tensor<double>({2, 1, 4}, rng);
    auto b = random_tensor<double>({3, 1}, rng);
    auto c = ops::add(a, b);
    CHECK(c.shape() == Shape{2, 3, 4});
    CHECK(c.at({1, 2, 3}) == doctest::Approx(a.at({1, 0, 3}) + b.at({2, 0})));
    CHECK(testutil::all_finite(c));

    auto bad = Tensor<double>{Shape{2, 5}};
    CHECK_THROWS_AS(ops::add(a, bad), DimensionError);

    auto m = ops::mean(c);
    double acc = 0.0;
    for (auto v : c.values()) acc += v;
    CHECK(m.item() == doctest::Approx(acc / c.numel()).epsilon(1e-12));
}

TEST_CASE("permute and slice round trips") {
    Rng rng(37);
    auto x = random_tensor<double>({2, 3, 4}, rng);
    auto p = ops::permute(x, {2, 0, 1});
    CHECK(p.shape() == Shape{4, 2, 3});
    CHECK(p.at({3, 1, 2}) == x.at({1, 2, 3}));
    auto back = ops::permute(p, {1, 2, 0});
    CHECK(testutil::bits_equal(back, x));

    auto s = ops::slice(x, 1, 1, 2);
    CHECK(s.shape() == Shape{2, 2, 4});
    CHECK(s.at({0, 0, 0}) == x.at({0, 1, 0}));
    CHECK_THROWS_AS(ops::slice(x, 1, 2, 2), RangeError);
    CHECK_THROWS_AS(ops::permute(x, {0, 0, 1}), DimensionError);
}

// --- gradient checks: every differentiable op vs central finite differences,
// ten seeds each (module invariant).

TEST_CASE("gradcheck: matmul is exact to 1e-7") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(mix_seed(100, seed));
        auto a = random_tensor<double>({3, 4}, rng);
        auto b = random_tensor<double>({4, 2}, rng);
        auto w = random_tensor<double>({3, 2}, rng);
        auto res = grad_check<double>([&] { return project(ops::matmul(a, b), w); }, {a, b});
        CHECK(res.max_rel_err < 1e-7);
    }
}

TEST_CASE("gradcheck: batched matmul with broadcast") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(mix_seed(101, seed));
        auto a = random_tensor<double>({2, 3, 4}, rng);
        auto b = random_tensor<double>({4, 2}, rng);
        auto w = random_tensor<double>({2, 3, 2}, rng);
        auto res = grad_check<double>([&] { return project(ops::matmul(a, b), w); }, {a, b});
        CHECK(res.max_rel_err < 1e-7);
    }
}

TEST_CASE("gradcheck: gelu below 1e-5") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(mix_seed(102, seed));
        auto x = random_tensor<double>({17}, rng, -3, 3);
        auto w = random_tensor<double>({17}, rng);
        auto res = grad_check<double>([&] { return project(ops::gelu(x), w); }, {x});
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("gradcheck: softmax, layer_norm, sigmoid, conv2d, bce below 1e-4") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(mix_seed(103, seed));

        auto x = random_tensor<double>({3, 5}, rng, -2, 2);
        auto w = random_tensor<double>({3, 5}, rng);
        auto r1 = grad_check<double>([&] { return project(ops::softmax(x, 1), w); }, {x});
        CHECK(r1.max_rel_err < 1e-4);

        auto gamma = random_tensor<double>({5}, rng, 0.5, 1.5);
        auto beta = random_tensor<double>({5}, rng);
        auto r2 = grad_check<double>(
            [&] { return project(ops::layer_norm(x, gamma, beta, 1), w); }, {x, gamma, beta});
        CHECK(r2.max_rel_err < 1e-4);

        auto r3 = grad_check<double>([&] { return project(ops::sigmoid(x), w); }, {x});
        CHECK(r3.max_rel_err < 1e-4);

        auto img = random_tensor<double>({2, 2, 4, 4}, rng);
        auto k = random_tensor<double>({3, 2, 3, 3}, rng);
        auto kb = random_tensor<double>({3}, rng);
        auto wy = random_tensor<double>({2, 3, 4, 4}, rng);
        auto r4 = grad_check<double>([&] { return project(ops::conv2d(img, k, kb), wy); },
                                     {img, k, kb});
        CHECK(r4.max_rel_err < 1e-4);

        auto t = random_tensor<double>({3, 5}, rng, 0.05, 0.95);
        auto r5 = grad_check<double>([&] { return ops::sigmoid_bce(x, t); }, {x});
        CHECK(r5.max_rel_err < 1e-4);

        auto a2 = random_tensor<double>({4, 1, 3}, rng);
        auto b2 = random_tensor<double>({2, 3}, rng);
        auto w2 = random_tensor<double>({4, 2, 3}, rng);
        auto r6 = grad_check<double>(
            [&] { return project(ops::mul(ops::add(a2, b2), b2), w2); }, {a2, b2});
        CHECK(r6.max_rel_err < 1e-4);

        auto r7 = grad_check<double>(
            [&] {
                auto p = ops::permute(x, {1, 0});
                auto rs = ops::reshape(p, {5, 3});
                auto sl = ops::slice(rs, 0, 1, 3);
                return ops::sum(ops::mul(sl, sl));
            },
            {x});
        CHECK(r7.max_rel_err < 1e-4);
    }
}
