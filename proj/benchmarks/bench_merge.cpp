#include <benchmark/benchmark.h>

#include <vector>

#include "bench_common.hpp"
#include "qbp/merge.hpp"
#include "qbp/rng.hpp"

using namespace qbp;

namespace {

// Twenty statistically independent static block sums of a shared probability
// pattern (binomial counts), built once.
struct MergeFixture {
  BlockSum ref;
  std::vector<BlockSum> aux;

  MergeFixture() {
    const int w = 128, h = 128, n = 100;
    const FluxImage pattern = bench::textured_flux(w, h, 0.3);
    for (int b = 0; b < 20; ++b) {
      BlockSum block;
      block.counts = Image<double>(w, h, 0.0);
      block.n_frames = n;
      block.start_frame = b * n;
      block.center_frame = b * n + n / 2;
      for (int y = 0; y < h; ++y) {
        RngStream rng(11, static_cast<uint64_t>(b), static_cast<uint64_t>(y));
        for (int x = 0; x < w; ++x) {
          const double p = std::min(pattern.at(x, y), 0.95);
          int c = 0;
          for (int f = 0; f < n; ++f) c += rng.uniform() < p ? 1 : 0;
          block.counts.at(x, y) = c;
        }
      }
      if (b == 0)
        ref = std::move(block);
      else
        aux.push_back(std::move(block));
    }
  }
};

void BM_WienerMerge(benchmark::State& state) {
  static const MergeFixture fx;
  MergeConfig cfg;
  for (auto _ : state) {
    MergedImage merged = wiener_merge(fx.ref, fx.aux, cfg);
    benchmark::DoNotOptimize(merged.counts.data.data());
  }
}

void BM_SuperResolve2x(benchmark::State& state) {
  static const MergeFixture fx;
  MergeConfig mcfg;
  SRConfig sr;
  std::vector<PatchFlow> residuals;
  for (size_t i = 0; i < fx.aux.size(); ++i) {
    PatchFlow f = make_zero_flow(fx.ref.counts.width, fx.ref.counts.height, 16,
                                 fx.aux[i].center_frame);
    for (auto& uv : f.uv) uv = {0.25 * static_cast<double>(i % 4), 0.25 * static_cast<double>(i / 4 % 4)};
    residuals.push_back(std::move(f));
  }
  Image<double> guide = fx.ref.counts;
  for (const auto& a : fx.aux)
    for (size_t i = 0; i < guide.data.size(); ++i) guide.data[i] += a.counts.data[i];
  const double guide_frames = 100.0 * (1.0 + static_cast<double>(fx.aux.size()));
  for (auto _ : state) {
    MergedImage merged = super_resolve(fx.ref, fx.aux, residuals, guide, guide_frames, sr, mcfg);
    benchmark::DoNotOptimize(merged.counts.data.data());
  }
}

}  // namespace

BENCHMARK(BM_WienerMerge)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuperResolve2x)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
