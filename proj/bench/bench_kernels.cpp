// Parallel kernels vs the serial reference on layer shapes taken from the
// networks. Run with OMP_NUM_THREADS to vary the parallel side; the reference
// is always single-threaded.

#include <random>

#include <benchmark/benchmark.h>

#include "chromasem/kernels/gemm.hpp"
#include "chromasem/kernels/ops.hpp"

namespace {

using namespace chromasem;
namespace par = kernels::parallel;
namespace ref = kernels::reference;

Tensor<float> random_tensor(Shape s, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  Tensor<float> t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Args: channels in, channels out, spatial size.
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({32, 32, 88})->Args({64, 128, 44})->Args({256, 256, 22})->Unit(benchmark::kMillisecond);
}

template <bool Parallel>
void BM_Gemm(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  auto a = random_tensor({1, 1, n, n}, 1), b = random_tensor({1, 1, n, n}, 2);
  Tensor<float> c({1, 1, n, n});
  kernels::MatView<float> av{a.data(), n, 1}, bv{b.data(), n, 1};
  for (auto _ : st) {
    if constexpr (Parallel)
      kernels::gemm(n, n, n, av, bv, c.data(), n, false);
    else
      kernels::gemm_naive(n, n, n, av, bv, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(st.iterations() * 2LL * n * n * n);
}

template <bool Parallel>
void BM_Conv(benchmark::State& st) {
  const int ci = static_cast<int>(st.range(0)), co = static_cast<int>(st.range(1)),
            s = static_cast<int>(st.range(2));
  auto x = random_tensor({1, ci, s, s}, 3), w = random_tensor({co, ci, 3, 3}, 4);
  auto bias = random_tensor({1, co, 1, 1}, 5);
  kernels::ConvParams p;
  for (auto _ : st) {
    auto y = Parallel ? par::conv2d_forward(x, w, &bias, p) : ref::conv2d_forward(x, w, &bias, p);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& st) {
  const int ci = static_cast<int>(st.range(0)), co = static_cast<int>(st.range(1)),
            s = static_cast<int>(st.range(2));
  auto x = random_tensor({1, ci, s, s}, 3), w = random_tensor({co, ci, 3, 3}, 4);
  auto dy = random_tensor({1, co, s, s}, 6);
  Tensor<float> dx(x.shape()), dw(w.shape()), db({1, co, 1, 1});
  kernels::ConvParams p;
  for (auto _ : st) {
    if constexpr (Parallel)
      par::conv2d_backward(x, w, dy, p, &dx, &dw, &db);
    else
      ref::conv2d_backward(x, w, dy, p, &dx, &dw, &db);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Parallel>
void BM_ConvTranspose(benchmark::State& st) {
  const int ci = static_cast<int>(st.range(0)), co = static_cast<int>(st.range(1)),
            s = static_cast<int>(st.range(2)) / 2;
  auto x = random_tensor({1, ci, s, s}, 7), w = random_tensor({ci, co, 3, 3}, 8);
  kernels::ConvParams p{2, 1, 1};
  for (auto _ : st) {
    auto y = Parallel ? par::conv_transpose2d_forward<float>(x, w, nullptr, p)
                      : ref::conv_transpose2d_forward<float>(x, w, nullptr, p);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_InstanceNorm(benchmark::State& st) {
  const int c = static_cast<int>(st.range(0)), s = static_cast<int>(st.range(1));
  auto x = random_tensor({1, c, s, s}, 9), dy = random_tensor({1, c, s, s}, 10);
  for (auto _ : st) {
    kernels::NormStats<float> stats;
    Tensor<float> dx(x.shape());
    if constexpr (Parallel) {
      auto y = par::instance_norm_forward(x, 1e-5f, &stats);
      par::instance_norm_backward(y, stats, dy, dx);
    } else {
      auto y = ref::instance_norm_forward(x, 1e-5f, &stats);
      ref::instance_norm_backward(y, stats, dy, dx);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<false>)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv<true>)->Apply(conv_args);
BENCHMARK(BM_Conv<false>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Apply(conv_args);
BENCHMARK(BM_ConvTranspose<true>)->Apply(conv_args);
BENCHMARK(BM_ConvTranspose<false>)->Apply(conv_args);
BENCHMARK(BM_InstanceNorm<true>)->Args({32, 352})->Args({256, 44})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InstanceNorm<false>)->Args({32, 352})->Args({256, 44})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
