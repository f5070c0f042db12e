#include <benchmark/benchmark.h>

#include "tubesal/ops.hpp"

using namespace tubesal;

namespace {

template <typename T>
Tensor<T> rand_tensor(Shape shape, Rng& rng) {
    Tensor<T> t{std::move(shape)};
    for (auto& v : t.values()) v = T(rng.uniform(-1, 1));
    return t;
}

void BM_matmul_f32(benchmark::State& state) {
    const std::size_t n = std::size_t(state.range(0));
    Rng rng(1);
    auto a = rand_tensor<float>({n, n}, rng);
    auto b = rand_tensor<float>({n, n}, rng);
    for (auto _ : state) {
        auto c = ops::matmul(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_matmul_f32)->Arg(64)->Arg(256)->Arg(768);

void BM_matmul_backward_f32(benchmark::State& state) {
    const std::size_t n = std::size_t(state.range(0));
    Rng rng(2);
    auto a = rand_tensor<float>({n, n}, rng);
    auto b = rand_tensor<float>({n, n}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        Tape<float> tape;
        Tape<float>::Scope scope(tape);
        auto loss = ops::mean(ops::matmul(a, b));
        tape.backward(loss);
        benchmark::DoNotOptimize(a.grad().data());
        a.zero_grad();
        b.zero_grad();
    }
}
BENCHMARK(BM_matmul_backward_f32)->Arg(64)->Arg(256);

void BM_conv2d_f32(benchmark::State& state) {
    Rng rng(3);
    auto x = rand_tensor<float>({4, 8, 64, 64}, rng);
    auto k = rand_tensor<float>({8, 8, 3, 3}, rng);
    auto b = rand_tensor<float>({8}, rng);
    for (auto _ : state) {
        auto y = ops::conv2d(x, k, b);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_conv2d_f32);

void BM_softmax_f32(benchmark::State& state) {
    Rng rng(4);
    auto x = rand_tensor<float>({8, 4, 65, 65}, rng);
    for (auto _ : state) {
        auto y = ops::softmax(x, 3);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_softmax_f32);

}  // namespace

BENCHMARK_MAIN();
