#include "gsmotion/kernel.hpp"
#include "gsmotion/optimizer.hpp"
#include "gsmotion/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace gsmotion;

KernelSet random_kernels(int n, int size) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pos(0.0, size - 1.0), sig(1.0, 10.0), rho(-0.5, 0.5), col(0.05, 1.0);
    KernelSet ks(static_cast<std::size_t>(n));
    for (auto& k : ks) k = {{pos(rng), pos(rng)}, sig(rng), sig(rng), rho(rng), col(rng)};
    return ks;
}

void BM_Render(benchmark::State& st) {
    const auto ks = random_kernels(static_cast<int>(st.range(0)), 121);
    for (auto _ : st) benchmark::DoNotOptimize(render(ks, 121, 121));
}

void BM_RenderReference(benchmark::State& st) {
    const auto ks = random_kernels(static_cast<int>(st.range(0)), 121);
    for (auto _ : st) benchmark::DoNotOptimize(render_reference(ks, 121, 121));
}

struct PairState {
    KernelSet ks;
    MotionField m;
    FramePair frames;
};

PairState pair_state(int n) {
    PairState s{random_kernels(n, 121), {}, make_pair(reference_scene())};
    s.m.displacements.assign(s.ks.size(), Point{-0.01, -0.01});
    return s;
}

void BM_LossGradients(benchmark::State& st) {
    const auto s = pair_state(static_cast<int>(st.range(0)));
    for (auto _ : st)
        benchmark::DoNotOptimize(loss_gradients(s.ks, s.m, s.frames.frame1, s.frames.frame2, OptimConfig{}));
}

void BM_LossGradientsReference(benchmark::State& st) {
    const auto s = pair_state(static_cast<int>(st.range(0)));
    for (auto _ : st)
        benchmark::DoNotOptimize(
            loss_gradients_reference(s.ks, s.m, s.frames.frame1, s.frames.frame2, OptimConfig{}));
}

}  // namespace

BENCHMARK(BM_Render)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderReference)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradients)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradientsReference)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
