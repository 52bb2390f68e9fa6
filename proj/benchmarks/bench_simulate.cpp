#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "qbp/simulate.hpp"

using namespace qbp;

namespace {

// Static scene: the warp short-circuits, measuring the Bernoulli sampler alone.
void BM_SampleSpadStatic(benchmark::State& state) {
  const int n_frames = static_cast<int>(state.range(0));
  const SensorSpec spec = bench::bench_spad();
  const FluxImage flux =
      bench::textured_flux(256, 256, 0.1 / (spec.exposure_s() * spec.eta()));
  const MotionTrajectory traj;
  for (auto _ : state) {
    FrameSequence seq = sample_spad_sequence(flux, spec, traj, n_frames, std::nullopt, 7);
    benchmark::DoNotOptimize(seq.packed_frame(n_frames - 1).data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{256 * 256} * n_frames);
}

// Moving scene: adds the per-frame bilinear warp to the cost.
void BM_SampleSpadMoving(benchmark::State& state) {
  const int n_frames = static_cast<int>(state.range(0));
  const SensorSpec spec = bench::bench_spad();
  const FluxImage flux =
      bench::textured_flux(256, 256, 0.1 / (spec.exposure_s() * spec.eta()));
  MotionTrajectory traj;
  traj.velocity_px_per_s = {1500.0, 0.0};
  for (auto _ : state) {
    FrameSequence seq = sample_spad_sequence(flux, spec, traj, n_frames, std::nullopt, 7);
    benchmark::DoNotOptimize(seq.packed_frame(n_frames - 1).data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{256 * 256} * n_frames);
}

void BM_EmulateConventional(benchmark::State& state) {
  const int n_frames = static_cast<int>(state.range(0));
  SensorSpec spec = sensor_preset("conv-machinevision");
  const FluxImage flux = bench::textured_flux(256, 256, 1e5);
  const MotionTrajectory traj;
  ExposurePlan plan;
  plan.n_frames = n_frames;
  plan.total_exposure_s = n_frames * spec.exposure_s();
  for (auto _ : state) {
    FrameSequence seq = emulate_conventional_burst(flux, spec, traj, plan, 7);
    benchmark::DoNotOptimize(seq.wide_frame(n_frames - 1).data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{256 * 256} * n_frames);
}

}  // namespace

BENCHMARK(BM_SampleSpadStatic)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleSpadMoving)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmulateConventional)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
