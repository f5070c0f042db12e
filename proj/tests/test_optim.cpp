#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tubesal/optim.hpp"

using namespace tubesal;

TEST_CASE("adam: zero gradient leaves a fresh parameter unchanged") {
    auto p = Tensor<double>::from({3}, {1.0, -2.0, 0.5});
    auto before = p.clone();
    auto m = Tensor<double>::zeros({3});
    auto v = Tensor<double>::zeros({3});
    std::vector<double> g(3, 0.0);
    adam_step<double>(p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(testutil::bits_equal(p, before));
}

TEST_CASE("adam: first-step magnitude is ~lr in the gradient's direction") {
    auto p = Tensor<double>::from({2}, {0.0, 0.0});
    auto m = Tensor<double>::zeros({2});
    auto v = Tensor<double>::zeros({2});
    std::vector<double> g = {0.37, -1.9};
    const double lr = 1e-3;
    adam_step<double>(p, g, m, v, 1, lr, 0.9, 0.999, 1e-8);
    // closed form: mhat/sqrt(vhat) = sign(g) up to eps
    CHECK(p.at({0}) == doctest::Approx(-lr).epsilon(1e-4));
    CHECK(p.at({1}) == doctest::Approx(lr).epsilon(1e-4));
}

TEST_CASE("adam: two steps with constant grad move monotonically, matches unrolled oracle") {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-2, g = 0.8;
    auto p = Tensor<double>::from({1}, {1.0});
    auto m = Tensor<double>::zeros({1});
    auto v = Tensor<double>::zeros({1});
    std::vector<double> grad = {g};

    // independent scalar unroll
    double om = 0.0, ov = 0.0, op = 1.0;
    for (int t = 1; t <= 2; ++t) {
        om = beta1 * om + (1 - beta1) * g;
        ov = beta2 * ov + (1 - beta2) * g * g;
        const double mhat = om / (1 - std::pow(beta1, t));
        const double vhat = ov / (1 - std::pow(beta2, t));
        op -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    adam_step<double>(p, grad, m, v, 1, lr, beta1, beta2, eps);
    const double after1 = p.at({0});
    adam_step<double>(p, grad, m, v, 2, lr, beta1, beta2, eps);
    const double after2 = p.at({0});

    CHECK(after1 < 1.0);
    CHECK(after2 < after1);
    CHECK(after2 == doctest::Approx(op).epsilon(1e-12));
}

TEST_CASE("adam: bitwise deterministic for identical inputs") {
    auto run = [] {
        auto p = Tensor<float>::from({4}, {0.1f, 0.2f, 0.3f, 0.4f});
        auto m = Tensor<float>::zeros({4});
        auto v = Tensor<float>::zeros({4});
        std::vector<float> g = {0.5f, -0.25f, 0.125f, 1.5f};
        for (std::size_t t = 1; t <= 10; ++t) adam_step<float>(p, g, m, v, t, 1e-3f, 0.9f, 0.999f, 1e-8f);
        return p;
    };
    CHECK(testutil::bits_equal(run(), run()));
}

TEST_CASE("adam wrapper steps all parameters and zeroes grads") {
    auto a = Tensor<float>::from({2}, {1.f, 2.f}, true);
    auto b = Tensor<float>::from({1}, {3.f}, true);
    a.grad()[0] = 1.f;
    a.grad()[1] = -1.f;
    b.grad()[0] = 2.f;
    Adam<float> opt({{"a", a}, {"b", b}});
    opt.step(1e-2f);
    CHECK(opt.state().step == 1);
    CHECK(a.at({0}) < 1.f);
    CHECK(a.at({1}) > 2.f);
    CHECK(b.at({0}) < 3.f);
    opt.zero_grad();
    CHECK(a.grad()[0] == 0.f);
}

TEST_CASE("cosine schedule anchors and monotonicity") {
    CosineSchedule sched;  // defaults 1e-5 -> 1e-7 over 1e4
    CHECK(cosine_lr(0, sched) == 1e-5);
    CHECK(cosine_lr(10000, sched) == 1e-7);
    CHECK(cosine_lr(20000, sched) == 1e-7);
    CHECK(cosine_lr(5000, sched) == doctest::Approx(5.05e-6).epsilon(1e-12));

    double prev = cosine_lr(0, sched);
    for (std::size_t t = 1; t <= 10000; t += 7) {
        const double lr = cosine_lr(t, sched);
        CHECK(lr <= prev + 1e-18);
        CHECK(lr >= sched.lr_min);
        CHECK(lr <= sched.lr_max);
        prev = lr;
    }
}
