#include <benchmark/benchmark.h>

#include "pecan/codebook.hpp"
#include "pecan/lut.hpp"
#include "pecan/rng.hpp"
#include "pecan/tensor.hpp"

using namespace pecan;

namespace {

Tensor randn(Shape s, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Tensor t(std::move(s));
    for (double& v : t.data()) v = rng.normal();
    return t;
}

void BM_Im2col(benchmark::State& state) {
    ConvGeometry g;
    g.c_in = static_cast<std::size_t>(state.range(0));
    g.k = 3;
    g.h_in = g.w_in = 28;
    const Tensor x = randn({g.c_in, 28, 28}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(im2col(x, g));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.rows() * g.columns()));
}
BENCHMARK(BM_Im2col)->Arg(1)->Arg(8);

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = randn({n, n}, 2), b = randn({n, n}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

// One layer's lookup-table inference with D groups of d rows, p prototypes, 16 outputs, 121 columns.
template <bool Distance>
void BM_LutInference(benchmark::State& state) {
    const auto D = static_cast<std::size_t>(state.range(0)), d = static_cast<std::size_t>(state.range(1)),
               p = static_cast<std::size_t>(state.range(2));
    const std::size_t c_out = 16, n = 121;
    const Codebook cb = Codebook::from_tensor(randn({D, d, p}, 4));
    const LookupTable lut = build_lut(randn({c_out, D * d}, 5), cb);
    const GroupedFeatures x = split_groups(randn({D * d, n}, 6), D, d);
    for (auto _ : state) {
        if constexpr (Distance) benchmark::DoNotOptimize(infer_d(x, cb, lut));
        else benchmark::DoNotOptimize(infer_a(x, cb, lut, 1.0));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_LutInference<true>)->Name("BM_InferD")->Args({8, 9, 64})->Args({72, 1, 64});
BENCHMARK(BM_LutInference<false>)->Name("BM_InferA")->Args({8, 9, 8})->Args({24, 3, 4});

void BM_BuildLut(benchmark::State& state) {
    const Codebook cb = Codebook::from_tensor(randn({8, 9, 64}, 7));
    const Tensor w = randn({16, 72}, 8);
    for (auto _ : state) benchmark::DoNotOptimize(build_lut(w, cb));
}
BENCHMARK(BM_BuildLut);

void BM_KMeans(benchmark::State& state) {
    const Tensor x = randn({9, static_cast<std::size_t>(state.range(0))}, 9);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 64, 25, 1));
}
BENCHMARK(BM_KMeans)->Arg(2000)->Unit(benchmark::kMillisecond);

} // namespace
