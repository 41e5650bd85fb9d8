#include <benchmark/benchmark.h>

#include <random>

#include "egolabel/align.hpp"
#include "egolabel/optimize.hpp"
#include "egolabel/pipeline.hpp"
#include "egolabel/synth.hpp"

using namespace egolabel;

namespace {

SynthScenario scenario(std::size_t frames) {
    SynthConfig cfg;
    cfg.frames = frames;
    return gen_scenario(cfg);
}

void BM_ProjectFisheye(benchmark::State& state) {
    const FisheyeModel m = FisheyeModel::default_calibration();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> xy(-500.0, 500.0), z(100.0, 1500.0);
    std::vector<Vec3> pts(1024);
    for (auto& p : pts) p = Vec3(xy(rng), xy(rng), z(rng));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_fisheye(m, pts[i++ & 1023]));
    }
}
BENCHMARK(BM_ProjectFisheye);

void BM_Procrustes(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 300.0);
    std::vector<Vec3> a(kNumJoints), b(kNumJoints);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        a[j] = Vec3(n(rng), n(rng), n(rng));
        b[j] = a[j] + Vec3(n(rng), n(rng), n(rng)) * 0.05;
    }
    for (auto _ : state) benchmark::DoNotOptimize(procrustes(a, b, {}, true));
}
BENCHMARK(BM_Procrustes);

void BM_TotalEnergy(benchmark::State& state) {
    const auto s = scenario(static_cast<std::size_t>(state.range(0)));
    const auto obs = window_observations(s.dataset, 0, s.dataset.size());
    const WindowState st = initial_state(obs);
    const BoneTopology topo = BoneTopology::standard();
    for (auto _ : state) benchmark::DoNotOptimize(total_energy(st, obs, EnergyWeights{}, topo).total);
}
BENCHMARK(BM_TotalEnergy)->Arg(10)->Arg(50);

void BM_OptimizeWindow(benchmark::State& state) {
    const auto s = scenario(50);
    const auto obs = window_observations(s.dataset, 0, 50);
    OptimizerConfig cfg;
    cfg.rotation_mode = state.range(0) ? RotationMode::AxisAngle : RotationMode::RawMatrix;
    for (auto _ : state) {
        benchmark::DoNotOptimize(optimize_window(obs, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg));
    }
    state.SetLabel(state.range(0) ? "axis_angle" : "raw_matrix");
}
BENCHMARK(BM_OptimizeWindow)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
