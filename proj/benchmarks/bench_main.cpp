// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "bspinn/fd.hpp"
#include "bspinn/losses.hpp"
#include "bspinn/sampler.hpp"
#include "bspinn/trainer.hpp"

using namespace bspinn;

namespace {

MarketParams market(InstrumentKind kind) {
    MarketParams m;
    m.kind = kind;
    return m;
}

// One training epoch's worth of work: batched loss plus gradient on the default set.
void BM_LossAndGradient(benchmark::State& state) {
    const auto kind = static_cast<InstrumentKind>(state.range(0));
    const MarketParams m = market(kind);
    const Surrogate net = init_surrogate(MlpConfig{}, Scaling::make(m, 0.0, 135.0), 1);
    const CollocationSet set = sample_collocation(m, Domain{}, SamplerConfig{}, 2);
    const std::vector<double> anchor(net.params().begin(), net.params().end());
    std::vector<double> grad(net.param_count());
    LossEvaluator ev;
    for (auto _ : state) {
        const LossBreakdown l = ev.evaluate(net, set, LossWeights{}, anchor, grad);
        benchmark::DoNotOptimize(l.total);
        benchmark::DoNotOptimize(grad.data());
    }
}
BENCHMARK(BM_LossAndGradient)
    ->Arg(static_cast<int>(InstrumentKind::EuroPut))
    ->Arg(static_cast<int>(InstrumentKind::AmerPut))
    ->Unit(benchmark::kMillisecond);

// Same quantity through the point-by-point scalar tape.
void BM_TapeLossAndGradient(benchmark::State& state) {
    const MarketParams m = market(InstrumentKind::EuroPut);
    const Surrogate net = init_surrogate(MlpConfig{}, Scaling::make(m, 0.0, 135.0), 1);
    SamplerConfig sc;
    sc.interior = static_cast<std::size_t>(state.range(0));
    sc.terminal = sc.boundary = sc.interior;
    const CollocationSet set = sample_collocation(m, Domain{}, sc, 2);
    const std::vector<double> anchor(net.params().begin(), net.params().end());
    std::vector<double> grad(net.param_count());
    for (auto _ : state) {
        const LossBreakdown l = reference_loss(net, set, LossWeights{}, anchor, grad);
        benchmark::DoNotOptimize(l.total);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}
BENCHMARK(BM_TapeLossAndGradient)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Stage1Epochs(benchmark::State& state) {
    TrainPlan p;
    p.stage1_epochs = 50;
    p.threads = 1;
    for (auto _ : state) {
        const StageResult r = train_stage1(p, p.seed);
        benchmark::DoNotOptimize(r.log.epochs.back().total);
    }
    state.SetItemsProcessed(state.iterations() * p.stage1_epochs);
}
BENCHMARK(BM_Stage1Epochs)->Unit(benchmark::kMillisecond);

void BM_CrankNicolson(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        const FDGrid g = crank_nicolson(market(InstrumentKind::EuroPut), FDGridSpec{n, n, 135.0});
        benchmark::DoNotOptimize(g.values.data());
    }
}
BENCHMARK(BM_CrankNicolson)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_Psor(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        const FDGrid g = psor_american_put(market(InstrumentKind::AmerPut), FDGridSpec{n, n, 135.0});
        benchmark::DoNotOptimize(g.values.data());
    }
}
BENCHMARK(BM_Psor)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_BinomialTree(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(binomial_tree(market(InstrumentKind::AmerPut), 40.0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BinomialTree)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
