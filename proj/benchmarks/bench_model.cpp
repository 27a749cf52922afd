#include <benchmark/benchmark.h>

#include "pecan/model.hpp"
#include "pecan/rng.hpp"
#include "pecan/train.hpp"

using namespace pecan;

namespace {

Dataset digits(std::size_t n) {
    SplitMix64 rng(1);
    std::vector<float> f(n * 784);
    for (float& v : f) v = rng.uniform() < 0.8 ? 0.0f : static_cast<float>(rng.uniform());
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(10));
    return Dataset(1, 28, 28, std::move(f), std::move(labels));
}

Method method_of(const benchmark::State& state) { return static_cast<Method>(state.range(0)); }

void BM_InferenceImage(benchmark::State& state) {
    const InferenceEngine engine(init_model(lenet5(method_of(state)), 0));
    const Tensor x = digits(1).sample(0);
    for (auto _ : state) benchmark::DoNotOptimize(engine.logits(x));
    state.SetLabel(std::string(to_string(method_of(state))));
}
BENCHMARK(BM_InferenceImage)->DenseRange(0, 2);

void BM_AuditImage(benchmark::State& state) {
    const InferenceEngine engine(init_model(lenet5(method_of(state)), 0));
    const Tensor x = digits(1).sample(0);
    for (auto _ : state) benchmark::DoNotOptimize(engine.audit_sample(x));
    state.SetLabel(std::string(to_string(method_of(state))));
}
BENCHMARK(BM_AuditImage)->DenseRange(0, 2);

// One training epoch over 256 images, batch 64.
void BM_TrainEpoch(benchmark::State& state) {
    const Dataset data = digits(256);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.eval_every = 0;
    const Model m = init_model(lenet5(method_of(state)), 0);
    for (auto _ : state) benchmark::DoNotOptimize(train(m, data, nullptr, cfg));
    state.SetItemsProcessed(state.iterations() * 256);
    state.SetLabel(std::string(to_string(method_of(state))));
}
BENCHMARK(BM_TrainEpoch)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
