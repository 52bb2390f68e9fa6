#include "qbp/merge.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "merge_internal.hpp"
#include "qbp/fft.hpp"
#include "qbp/parallel.hpp"

namespace qbp {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

/// Per-pixel noise variance of a block, honoring a config override.
double per_pixel_variance(const BlockSum& block, const MergeConfig& cfg) {
  if (cfg.noise_sigma > 0) return cfg.noise_sigma * cfg.noise_sigma;
  const double s = estimate_block_noise_sigma(block);
  return s * s;
}

}  // namespace

void MergeConfig::validate() const {
  if (merge_block_size < 0) throw std::invalid_argument("merge_block_size must be >= 0");
  if (!is_power_of_two(tile_size_px) || tile_size_px < 2)
    throw std::invalid_argument("tile_size_px must be a power of two >= 2");
  if (tile_overlap != 0.0 && tile_overlap != 0.5)
    throw std::invalid_argument("tile_overlap must be 0 or 0.5");
  if (noise_scale_c < 0) throw std::invalid_argument("noise_scale_c must be >= 0");
  if (noise_sigma < 0) throw std::invalid_argument("noise_sigma must be >= 0");
}

void SRConfig::validate() const {
  if (upsample_factor < 1 || upsample_factor > 8)
    throw std::invalid_argument("upsample_factor must be in [1, 8]");
  if (!is_power_of_two(tile_size_px) || tile_size_px < 4)
    throw std::invalid_argument("sr tile_size_px must be a power of two >= 4");
  if (k_detail <= 0 || k_denoise <= 0 || k_stretch <= 0 || k_shrink <= 0)
    throw std::invalid_argument("kernel gains must be > 0");
  if (d_tr <= 0) throw std::invalid_argument("d_tr must be > 0");
  if (anisotropy_cap < 1) throw std::invalid_argument("anisotropy_cap must be >= 1");
}

namespace detail {

TilePlan make_tile_plan(int width, int height, int tile, double overlap) {
  if (!is_power_of_two(tile) || tile < 2)
    throw std::invalid_argument("tile size must be a power of two >= 2");
  if (overlap != 0.0 && overlap != 0.5)
    throw std::invalid_argument("tile overlap must be 0 or 0.5");
  if (width < 1 || height < 1) throw std::invalid_argument("empty image");

  TilePlan plan;
  plan.tile = tile;
  plan.windowed = overlap == 0.5;
  plan.stride = plan.windowed ? tile / 2 : tile;
  plan.win1d.assign(static_cast<size_t>(tile), 1.0);
  if (plan.windowed) {
    // Raised cosine; the second half is the exact complement of the first so
    // two half-overlapped copies sum to exactly 1 in floating point.
    const int half = tile / 2;
    for (int i = 0; i < half; ++i) {
      plan.win1d[static_cast<size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / tile);
      plan.win1d[static_cast<size_t>(i + half)] = 1.0 - plan.win1d[static_cast<size_t>(i)];
    }
  }
  plan.spectral_scale = static_cast<double>(tile) * tile;

  const int start = plan.windowed ? -tile / 2 : 0;
  for (int x = start; x <= width - 1; x += plan.stride) plan.xs.push_back(x);
  for (int y = start; y <= height - 1; y += plan.stride) plan.ys.push_back(y);
  return plan;
}

void tile_spectrum(const Image<double>& img, const TilePlan& plan, int tx, int ty,
                   std::complex<double>* buf) {
  const int t = plan.tile;
  const int x0 = plan.xs[static_cast<size_t>(tx)];
  const int y0 = plan.ys[static_cast<size_t>(ty)];
  for (int iy = 0; iy < t; ++iy) {
    const double wy = plan.win1d[static_cast<size_t>(iy)];
    for (int ix = 0; ix < t; ++ix) {
      buf[iy * t + ix] = img.at_clamped(x0 + ix, y0 + iy) *
                         (plan.win1d[static_cast<size_t>(ix)] * wy);
    }
  }
  fft::fft2d(buf, t, false);
}

std::vector<std::vector<std::complex<double>>> all_tile_spectra(const Image<double>& img,
                                                                const TilePlan& plan) {
  const int ntx = static_cast<int>(plan.xs.size());
  const int n = plan.count();
  std::vector<std::vector<std::complex<double>>> out(static_cast<size_t>(n));
  parallel_for(0, n, [&](int64_t idx) {
    auto& spec = out[static_cast<size_t>(idx)];
    spec.resize(static_cast<size_t>(plan.tile) * plan.tile);
    tile_spectrum(img, plan, static_cast<int>(idx) % ntx, static_cast<int>(idx) / ntx,
                  spec.data());
  });
  return out;
}

Image<double> wiener_blend(const Image<double>& aux,
                           const std::vector<std::vector<std::complex<double>>>& ref_spectra,
                           const TilePlan& plan, double c_sigma2) {
  const int t = plan.tile;
  const int ntx = static_cast<int>(plan.xs.size());
  const int n = plan.count();
  std::vector<std::vector<double>> tiles(static_cast<size_t>(n));

  parallel_for(0, n, [&](int64_t idx) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(t) * t);
    tile_spectrum(aux, plan, static_cast<int>(idx) % ntx, static_cast<int>(idx) / ntx,
                  buf.data());
    const auto& ref = ref_spectra[static_cast<size_t>(idx)];
    for (size_t k = 0; k < buf.size(); ++k) {
      const std::complex<double> d = ref[k] - buf[k];
      const double d2 = std::norm(d);
      const double denom = d2 + c_sigma2;
      const double a = denom > 0 ? d2 / denom : 0.0;
      buf[k] += a * d;
    }
    fft::fft2d(buf.data(), t, true);
    auto& out = tiles[static_cast<size_t>(idx)];
    out.resize(buf.size());
    for (size_t k = 0; k < buf.size(); ++k) out[k] = buf[k].real();
  });

  Image<double> result(aux.width, aux.height, 0.0);
  for (int idx = 0; idx < n; ++idx) {  // serial, fixed order
    const int x0 = plan.xs[static_cast<size_t>(idx % ntx)];
    const int y0 = plan.ys[static_cast<size_t>(idx / ntx)];
    const auto& tilebuf = tiles[static_cast<size_t>(idx)];
    for (int iy = 0; iy < t; ++iy) {
      const int y = y0 + iy;
      if (y < 0 || y >= aux.height) continue;
      for (int ix = 0; ix < t; ++ix) {
        const int x = x0 + ix;
        if (x < 0 || x >= aux.width) continue;
        result.at(x, y) += tilebuf[static_cast<size_t>(iy) * t + ix];
      }
    }
  }
  return result;
}

}  // namespace detail

BlockSum warp_and_sum_block(const FrameSequence& seq, int first, int count,
                            const std::vector<PatchFlow>& frame_flows) {
  if (first < 0 || count < 1 || first + count > seq.n_frames())
    throw std::invalid_argument("warp_and_sum_block: frame range out of bounds");
  if (frame_flows.size() < static_cast<size_t>(first + count))
    throw std::invalid_argument("warp_and_sum_block: missing per-frame flows");
  const int w = seq.width();
  const int h = seq.height();

  Image<double> acc(w, h, 0.0);
  constexpr int kBatch = 16;
  std::vector<Image<double>> bufs(static_cast<size_t>(std::min(kBatch, count)));
  for (auto& b : bufs) b = Image<double>(w, h, 0.0);

  for (int b0 = first; b0 < first + count; b0 += kBatch) {
    const int nb = std::min(kBatch, first + count - b0);
    parallel_for(0, nb, [&](int64_t k) {
      const int f = b0 + static_cast<int>(k);
      Image<double>& buf = bufs[static_cast<size_t>(k)];
      std::fill(buf.data.begin(), buf.data.end(), 0.0);
      const PatchFlow& flow = frame_flows[static_cast<size_t>(f)];
      const int p = flow.patch_size_px;
      for (int y = 0; y < h; ++y) {
        const int pj = std::min(y / p, flow.grid_h - 1);
        for (int x = 0; x < w; ++x) {
          const double v = static_cast<double>(seq.get(f, x, y));
          if (v == 0.0) continue;
          const auto uv = flow.at(std::min(x / p, flow.grid_w - 1), pj);
          const double dx = x - uv[0];
          const double dy = y - uv[1];
          const int x0 = static_cast<int>(std::floor(dx));
          const int y0 = static_cast<int>(std::floor(dy));
          const double fx = dx - x0;
          const double fy = dy - y0;
          const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
          const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
          const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
          for (int q = 0; q < 4; ++q) {
            if (wts[q] == 0.0) continue;
            if (xs[q] < 0 || xs[q] >= w || ys[q] < 0 || ys[q] >= h) continue;
            buf.at(xs[q], ys[q]) += v * wts[q];
          }
        }
      }
    });
    for (int k = 0; k < nb; ++k) {  // serial, frame order
      const auto& src = bufs[static_cast<size_t>(k)].data;
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += src[i];
    }
  }

  BlockSum block;
  block.counts = std::move(acc);
  block.n_frames = count;
  block.start_frame = first;
  block.center_frame = first + count / 2;
  return block;
}

double estimate_block_noise_sigma(const BlockSum& block) {
  if (block.n_frames < 1) throw std::invalid_argument("block has no frames");
  const double n = static_cast<double>(block.n_frames);
  double sum = 0;
  for (double c : block.counts.data) {
    const double p = std::clamp(c / n, 0.0, 1.0);
    sum += n * p * (1.0 - p);
  }
  return std::sqrt(sum / static_cast<double>(block.counts.data.size()));
}

MergedImage wiener_merge(const BlockSum& ref_block, const std::vector<BlockSum>& aux_blocks,
                         const MergeConfig& cfg) {
  cfg.validate();
  for (const auto& a : aux_blocks) {
    require_same_shape(ref_block.counts, a.counts, "wiener_merge blocks");
    if (a.n_frames != ref_block.n_frames)
      throw std::invalid_argument("wiener_merge: blocks must hold equal frame counts");
  }

  MergedImage merged;
  merged.counts = ref_block.counts;
  merged.effective_frames =
      static_cast<double>(1 + aux_blocks.size()) * ref_block.n_frames;
  merged.resolution_scale = 1;
  merged.flags = Image<uint8_t>(ref_block.counts.width, ref_block.counts.height, uint8_t{0});

  if (cfg.noise_scale_c == 0.0) {  // shrinkage disabled: plain sum of all blocks
    for (const auto& a : aux_blocks)
      for (size_t i = 0; i < merged.counts.data.size(); ++i)
        merged.counts.data[i] += a.counts.data[i];
    return merged;
  }

  const auto plan = detail::make_tile_plan(ref_block.counts.width, ref_block.counts.height,
                                           cfg.tile_size_px, cfg.tile_overlap);
  const auto ref_spectra = detail::all_tile_spectra(ref_block.counts, plan);
  const double var_ref = per_pixel_variance(ref_block, cfg);
  for (const auto& a : aux_blocks) {
    const double sigma2 = (var_ref + per_pixel_variance(a, cfg)) * plan.spectral_scale;
    const Image<double> filtered =
        detail::wiener_blend(a.counts, ref_spectra, plan, cfg.noise_scale_c * sigma2);
    for (size_t i = 0; i < merged.counts.data.size(); ++i)
      merged.counts.data[i] += filtered.data[i];
  }
  for (auto& v : merged.counts.data) v = std::max(v, 0.0);  // clip filter ringing
  return merged;
}

MergedImage merge_pipeline(const FrameSequence& seq, const AlignConfig& align_cfg,
                           const MergeConfig& merge_cfg, const std::optional<SRConfig>& sr,
                           PipelineDebug* debug) {
  merge_cfg.validate();
  if (sr) sr->validate();

  const auto blocks = block_sums(seq, align_cfg.block_size_frames);
  const int nb = static_cast<int>(blocks.size());
  const int ref_b = nb / 2;
  const int w = seq.width();
  const int h = seq.height();

  std::vector<PatchFlow> block_flows(static_cast<size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    if (b == ref_b) {
      block_flows[static_cast<size_t>(b)] = make_zero_flow(
          w, h, align_cfg.patch_size_px, blocks[static_cast<size_t>(b)].center_frame);
      continue;
    }
    PatchFlow f = hierarchical_align(blocks[static_cast<size_t>(ref_b)],
                                     blocks[static_cast<size_t>(b)], align_cfg);
    if (align_cfg.lambda_reg > 0)
      f = regularize_flow(f, blocks[static_cast<size_t>(ref_b)], blocks[static_cast<size_t>(b)],
                          align_cfg);
    block_flows[static_cast<size_t>(b)] = std::move(f);
  }

  const int block_frames = align_cfg.block_size_frames;
  const int frames_used = nb * block_frames;
  const int ref_frame = blocks[static_cast<size_t>(ref_b)].center_frame;

  std::vector<PatchFlow> frame_flows;
  if (merge_cfg.interpolate_frame_flows) {
    frame_flows = interpolate_flow(block_flows, block_frames, frames_used, ref_frame);
  } else {
    frame_flows.reserve(static_cast<size_t>(frames_used));
    for (int f = 0; f < frames_used; ++f) {
      PatchFlow pf = block_flows[static_cast<size_t>(std::min(f / block_frames, nb - 1))];
      pf.granularity = PatchFlow::Granularity::Frame;
      pf.timestamp = f;
      frame_flows.push_back(std::move(pf));
    }
  }

  if (debug) {
    debug->block_flows = block_flows;
    debug->ref_block_index = ref_b;
    debug->ref_frame_index = ref_frame;
  }

  const int mb = merge_cfg.merge_block_size > 0 ? merge_cfg.merge_block_size : block_frames;
  const int nmb = frames_used / mb;
  if (nmb < 1) throw std::invalid_argument("merge block size exceeds aligned frame count");
  const int ref_m = nmb / 2;

  // For super-resolution, remove only the integer part of each merge block's
  // central flow so every block keeps a deliberate sub-pixel offset against
  // the reference grid; the reference block itself is fully aligned.
  std::vector<PatchFlow> residuals;  // one per merge block
  if (sr) {
    residuals.reserve(static_cast<size_t>(nmb));
    for (int m = 0; m < nmb; ++m) {
      PatchFlow res = frame_flows[static_cast<size_t>(m * mb + mb / 2)];
      if (m == ref_m) {
        for (auto& uv : res.uv) uv = {0.0, 0.0};
      } else {
        for (auto& uv : res.uv) {
          uv[0] -= std::round(uv[0]);
          uv[1] -= std::round(uv[1]);
        }
      }
      residuals.push_back(std::move(res));
      if (m != ref_m) {
        const auto& r = residuals.back();
        for (int f = m * mb; f < (m + 1) * mb; ++f) {
          auto& uvs = frame_flows[static_cast<size_t>(f)].uv;
          for (size_t k = 0; k < uvs.size(); ++k) {
            uvs[k][0] -= r.uv[k][0];
            uvs[k][1] -= r.uv[k][1];
          }
        }
      }
    }
  }

  std::vector<BlockSum> warped;
  warped.reserve(static_cast<size_t>(nmb));
  for (int m = 0; m < nmb; ++m)
    warped.push_back(warp_and_sum_block(seq, m * mb, mb, frame_flows));

  std::vector<BlockSum> aux;
  aux.reserve(static_cast<size_t>(nmb - 1));
  for (int m = 0; m < nmb; ++m)
    if (m != ref_m) aux.push_back(warped[static_cast<size_t>(m)]);

  if (!sr) return wiener_merge(warped[static_cast<size_t>(ref_m)], aux, merge_cfg);

  Image<double> guide(w, h, 0.0);
  for (const auto& b : warped)
    for (size_t i = 0; i < guide.data.size(); ++i) guide.data[i] += b.counts.data[i];
  std::vector<PatchFlow> aux_residuals;
  aux_residuals.reserve(static_cast<size_t>(nmb - 1));
  for (int m = 0; m < nmb; ++m)
    if (m != ref_m) aux_residuals.push_back(residuals[static_cast<size_t>(m)]);

  return super_resolve(warped[static_cast<size_t>(ref_m)], aux, aux_residuals, guide,
                       static_cast<double>(frames_used), *sr, merge_cfg);
}

}  // namespace qbp
