#include <benchmark/benchmark.h>

#include "fdnet/conv.hpp"
#include "fdnet/loss.hpp"
#include "fdnet/sparse.hpp"
#include "fdnet/train.hpp"
#include "fdnet/unet.hpp"

using namespace fdnet;

namespace {

template <typename T>
Tensor<T> random_tensor(Rng& rng, int c, int r, int k) {
    Tensor<T> t(c, r, k);
    for (auto& v : t.data) v = static_cast<T>(rng.next_symmetric(1.0));
    return t;
}

void BM_conv2d_forward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int ch = static_cast<int>(state.range(1));
    Rng rng(1);
    const Tensor<float> in = random_tensor<float>(rng, ch, n, n);
    Kernel<float> k(32, ch, 5, 5, 1, Padding::same_zero);
    for (auto& v : k.data) v = static_cast<float>(rng.next_symmetric(0.1));
    std::vector<float> bias(32, 0.1f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d(in, k, &bias));
    }
    state.SetItemsProcessed(state.iterations() * int64_t(ch) * 32 * n * n * 25 * 2);
}
BENCHMARK(BM_conv2d_forward)->Args({32, 32})->Args({64, 32})->Args({128, 32})->Args({128, 64});

void BM_conv2d_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    const Tensor<float> in = random_tensor<float>(rng, 32, n, n);
    const Tensor<float> up = random_tensor<float>(rng, 32, n, n);
    Kernel<float> k(32, 32, 5, 5, 1, Padding::same_zero);
    for (auto& v : k.data) v = static_cast<float>(rng.next_symmetric(0.1));
    Kernel<float> kg(32, 32, 5, 5, 1, Padding::same_zero);
    std::vector<float> bg(32, 0.0f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_grad_input(up, k, n, n));
        conv2d_grad_kernel(up, in, k, kg, &bg);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * int64_t(32) * 32 * n * n * 25 * 4);
}
BENCHMARK(BM_conv2d_backward)->Args({32})->Args({64})->Args({128});

void BM_training_iteration(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const ProblemSpec problem = make_problem("bubble");
    const GridSpec grid = problem.vertex_grid(n);
    NetworkSpec spec;
    spec.depth = 3;
    spec.input_rows = spec.input_cols = n;
    TrainConfig<float> cfg;
    cfg.max_steps = 1;
    for (auto _ : state) {
        state.PauseTiming();
        cfg.seed++;
        state.ResumeTiming();
        benchmark::DoNotOptimize(train_elliptic(problem, grid, spec, cfg));
    }
}
BENCHMARK(BM_training_iteration)->Args({32})->Args({64})->Unit(benchmark::kMillisecond);

void BM_cg_solve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const ProblemSpec problem = make_problem("peak");
    const GridSpec grid = problem.cell_grid(n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_elliptic(problem, grid));
    }
}
BENCHMARK(BM_cg_solve)->Args({32})->Args({64})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
