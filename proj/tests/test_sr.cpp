// Kernel-regression super-resolution: kernel shaping, resampling geometry,
// fallback behavior, and consistency with the frequency-domain merge.
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "merge_internal.hpp"
#include "qbp/align.hpp"
#include "qbp/image.hpp"
#include "qbp/merge.hpp"
#include "qbp/rng.hpp"

namespace {

qbp::BlockSum make_block(const qbp::Image<double>& img, int n_frames, int start) {
  qbp::BlockSum b;
  b.counts = img;
  b.n_frames = n_frames;
  b.start_frame = start;
  b.center_frame = start + n_frames / 2;
  return b;
}

qbp::Image<double> smooth_image(int w, int h) {
  qbp::Image<double> img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(x, y) = 50.0 + 20.0 * std::sin(0.35 * x) * std::cos(0.28 * y) +
                     10.0 * std::sin(0.11 * x + 0.9);
  return img;
}

}  // namespace

TEST_CASE("kernel anisotropy is 1 + sqrt of the eigenvalue ratio, capped") {
  CHECK(qbp::detail::kernel_anisotropy(1.0, 1.0, 5.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(qbp::detail::kernel_anisotropy(4.0, 1.0, 5.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(qbp::detail::kernel_anisotropy(100.0, 1.0, 5.0) ==
        doctest::Approx(6.0).epsilon(1e-12));  // sqrt(100) = 10 capped at 5
  CHECK(qbp::detail::kernel_anisotropy(0.0, 0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("factor-1 resampling of a constant block is exact") {
  qbp::Image<double> img(16, 16);
  for (double& v : img.data) v = 42.0;
  qbp::SRConfig cfg;
  cfg.upsample_factor = 1;
  qbp::MergeConfig mcfg;

  const qbp::MergedImage out =
      qbp::super_resolve(make_block(img, 50, 0), {}, {}, img, 50.0, cfg, mcfg);
  REQUIRE(out.counts.width == 16);
  REQUIRE(out.counts.height == 16);
  CHECK(out.resolution_scale == 1);
  CHECK(out.effective_frames == doctest::Approx(50.0));
  for (double v : out.counts.data) CHECK(v == doctest::Approx(42.0).epsilon(1e-12));
  for (uint8_t fl : out.flags.data) CHECK(fl == 0);
}

TEST_CASE("factor-1 isotropic resampling barely perturbs a smooth block") {
  const qbp::Image<double> img = smooth_image(32, 32);
  qbp::SRConfig cfg;
  cfg.upsample_factor = 1;
  cfg.d_th = 10.0;  // force the flat (isotropic) branch everywhere
  qbp::MergeConfig mcfg;

  const qbp::MergedImage out =
      qbp::super_resolve(make_block(img, 50, 0), {}, {}, img, 50.0, cfg, mcfg);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double rel = std::abs(out.counts.at(x, y) - img.at(x, y)) /
                         std::max(1.0, std::abs(img.at(x, y)));
      CHECK(rel < 0.01);
    }
}

TEST_CASE("output geometry scales with the upsample factor") {
  const qbp::Image<double> img = smooth_image(16, 12);
  qbp::SRConfig cfg;
  cfg.upsample_factor = 3;
  qbp::MergeConfig mcfg;
  const qbp::MergedImage out =
      qbp::super_resolve(make_block(img, 25, 0), {}, {}, img, 25.0, cfg, mcfg);
  CHECK(out.counts.width == 48);
  CHECK(out.counts.height == 36);
  CHECK(out.flags.width == 48);
  CHECK(out.resolution_scale == 3);
  CHECK(out.effective_frames == doctest::Approx(25.0));
  for (double v : out.counts.data) CHECK(v >= 0.0);
}

TEST_CASE("a vanishing kernel falls back to the nearest sample and flags it") {
  // k_detail = 0.01 with the flat branch forced gives a kernel so tight that
  // at factor 2 every output pixel sits 0.25 px from the nearest sample and
  // the Gaussian weight underflows the cutoff: the result must be the exact
  // nearest-neighbor upsample with the fallback bit set everywhere.
  qbp::Image<double> img(8, 8);
  qbp::RngStream rng = qbp::row_stream(14, 0, 0);
  for (double& v : img.data) v = std::floor(100.0 * rng.uniform());

  qbp::SRConfig cfg;
  cfg.upsample_factor = 2;
  cfg.k_detail = 0.01;
  cfg.d_th = 10.0;
  qbp::MergeConfig mcfg;

  const qbp::MergedImage out =
      qbp::super_resolve(make_block(img, 10, 0), {}, {}, img, 10.0, cfg, mcfg);
  for (int oy = 0; oy < 16; ++oy)
    for (int ox = 0; ox < 16; ++ox) {
      CHECK((out.flags.at(ox, oy) & 1) == 1);
      CHECK(out.counts.at(ox, oy) == img.at(ox / 2, oy / 2));
    }
}

TEST_CASE("factor-1 kernel regression tracks the frequency-domain merge") {
  // Static noisy blocks, isotropic kernel: the count-normalized SR output and
  // wiener_merge output must agree closely.
  const int w = 32, h = 32, n = 100;
  qbp::Image<double> base = smooth_image(w, h);
  for (double& v : base.data) v = std::clamp(v / 120.0, 0.05, 0.95);  // probabilities

  auto noisy_block = [&](uint64_t frame_key) {
    qbp::Image<double> counts(w, h);
    for (int y = 0; y < h; ++y) {
      qbp::RngStream rng = qbp::row_stream(77, static_cast<int>(frame_key), y);
      for (int x = 0; x < w; ++x) {
        int c = 0;
        for (int t = 0; t < n; ++t) c += rng.uniform() < base.at(x, y) ? 1 : 0;
        counts.at(x, y) = static_cast<double>(c);
      }
    }
    return counts;
  };

  const qbp::BlockSum ref = make_block(noisy_block(0), n, 0);
  const std::vector<qbp::BlockSum> aux = {make_block(noisy_block(1), n, 100),
                                          make_block(noisy_block(2), n, 200)};

  qbp::MergeConfig mcfg;
  const qbp::MergedImage wm = qbp::wiener_merge(ref, aux, mcfg);

  qbp::Image<double> guide = ref.counts;
  for (const auto& a : aux)
    for (size_t k = 0; k < guide.data.size(); ++k) guide.data[k] += a.counts.data[k];

  qbp::SRConfig cfg;
  cfg.upsample_factor = 1;
  cfg.d_th = 10.0;  // isotropic everywhere
  std::vector<qbp::PatchFlow> residuals(aux.size());
  for (auto& r : residuals) r = qbp::make_zero_flow(w, h, 16, 0);
  const qbp::MergedImage sr =
      qbp::super_resolve(ref, aux, residuals, guide, 3.0 * n, cfg, mcfg);

  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < wm.counts.data.size(); ++k) {
    const double a = sr.counts.data[k] / sr.effective_frames;
    const double b = wm.counts.data[k] / wm.effective_frames;
    num += (a - b) * (a - b);
    den += b * b;
  }
  CHECK(num / den < 0.01);
}

TEST_CASE("small-block mode normalizes against the guide running estimate") {
  // Two identical constant blocks: the guide-rescaled reference equals each
  // block, so filtering is a no-op and the normalized output is the firing
  // probability.
  const double p = 0.4;
  const int n = 50;
  qbp::Image<double> counts(16, 16);
  for (double& v : counts.data) v = p * n;
  qbp::Image<double> guide(16, 16);
  for (double& v : guide.data) v = p * 2 * n;

  qbp::SRConfig cfg;
  cfg.upsample_factor = 1;
  cfg.small_block_mode = true;
  qbp::MergeConfig mcfg;

  const qbp::MergedImage out = qbp::super_resolve(
      make_block(counts, n, 0), {make_block(counts, n, n)},
      {qbp::make_zero_flow(16, 16, 16, 0)}, guide, 2.0 * n, cfg, mcfg);
  CHECK(out.effective_frames == doctest::Approx(static_cast<double>(n)));
  for (double v : out.counts.data)
    CHECK(v / out.effective_frames == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("super_resolve validates its inputs") {
  qbp::Image<double> img(16, 16);
  qbp::Image<double> small(8, 8);
  qbp::SRConfig cfg;
  qbp::MergeConfig mcfg;
  // One residual flow required per aux block.
  CHECK_THROWS_AS(qbp::super_resolve(make_block(img, 10, 0), {make_block(img, 10, 10)}, {},
                                     img, 20.0, cfg, mcfg),
                  std::invalid_argument);
  // Guide must match the block shape.
  CHECK_THROWS_AS(qbp::super_resolve(make_block(img, 10, 0), {}, {}, small, 10.0, cfg, mcfg),
                  std::invalid_argument);
  // Positive guide weight required.
  CHECK_THROWS_AS(qbp::super_resolve(make_block(img, 10, 0), {}, {}, img, 0.0, cfg, mcfg),
                  std::invalid_argument);
}
