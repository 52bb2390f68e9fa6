#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "qbp/align.hpp"
#include "qbp/simulate.hpp"

using namespace qbp;

namespace {

// Two 100-frame block sums of a drifting textured scene, built once.
struct AlignFixture {
  BlockSum ref, aux;
  AlignConfig cfg;

  AlignFixture() {
    const SensorSpec spec = bench::bench_spad();
    const FluxImage flux =
        bench::textured_flux(256, 256, 0.1 / (spec.exposure_s() * spec.eta()));
    MotionTrajectory traj;
    traj.velocity_px_per_s = {1500.0, 1100.0};
    const FrameSequence seq = sample_spad_sequence(flux, spec, traj, 300, std::nullopt, 7);
    auto blocks = block_sums(seq, 100);
    ref = std::move(blocks[0]);
    aux = std::move(blocks[2]);
  }
};

void BM_HierarchicalAlign(benchmark::State& state) {
  static const AlignFixture fx;
  for (auto _ : state) {
    PatchFlow flow = hierarchical_align(fx.ref, fx.aux, fx.cfg);
    benchmark::DoNotOptimize(flow.uv.data());
  }
}

void BM_RegularizeFlow(benchmark::State& state) {
  static const AlignFixture fx;
  const PatchFlow initial = hierarchical_align(fx.ref, fx.aux, fx.cfg);
  AlignConfig cfg = fx.cfg;
  cfg.lambda_reg = 0.1;
  for (auto _ : state) {
    PatchFlow flow = regularize_flow(initial, fx.ref, fx.aux, cfg);
    benchmark::DoNotOptimize(flow.uv.data());
  }
}

}  // namespace

BENCHMARK(BM_HierarchicalAlign)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegularizeFlow)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
