#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "merge_internal.hpp"
#include "qbp/merge.hpp"
#include "qbp/parallel.hpp"

namespace qbp {

namespace detail {

double kernel_anisotropy(double l1, double l2, double cap) {
  return 1.0 + std::min(std::sqrt(l1 / std::max(l2, 1e-12)), cap);
}

}  // namespace detail

namespace {

struct Tensor {
  double xx = 0, xy = 0, yy = 0;
};

/// Structure tensor field of a [0,1] guide: outer products of central-
/// difference gradients, smoothed with a 3x3 box.
std::vector<Tensor> tensor_field(const Image<double>& g) {
  const int w = g.width;
  const int h = g.height;
  std::vector<Tensor> raw(static_cast<size_t>(w) * h);
  parallel_for(0, h, [&](int64_t y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (g.at_clamped(x + 1, static_cast<int>(y)) -
                               g.at_clamped(x - 1, static_cast<int>(y)));
      const double gy = 0.5 * (g.at_clamped(x, static_cast<int>(y) + 1) -
                               g.at_clamped(x, static_cast<int>(y) - 1));
      auto& t = raw[static_cast<size_t>(y) * w + x];
      t.xx = gx * gx;
      t.xy = gx * gy;
      t.yy = gy * gy;
    }
  });
  std::vector<Tensor> smooth(raw.size());
  parallel_for(0, h, [&](int64_t y) {
    for (int x = 0; x < w; ++x) {
      Tensor acc;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(static_cast<int>(y) + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          const auto& t = raw[static_cast<size_t>(yy) * w + xx];
          acc.xx += t.xx;
          acc.xy += t.xy;
          acc.yy += t.yy;
        }
      }
      auto& o = smooth[static_cast<size_t>(y) * w + x];
      o.xx = acc.xx / 9.0;
      o.xy = acc.xy / 9.0;
      o.yy = acc.yy / 9.0;
    }
  });
  return smooth;
}

Tensor tensor_at(const std::vector<Tensor>& field, int w, int h, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(cx), w - 2 >= 0 ? w - 2 : 0);
  const int y0 = std::min(static_cast<int>(cy), h - 2 >= 0 ? h - 2 : 0);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  auto at = [&](int xx, int yy) -> const Tensor& {
    return field[static_cast<size_t>(yy) * w + xx];
  };
  Tensor t;
  const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
  const double w01 = (1 - fx) * fy, w11 = fx * fy;
  t.xx = w00 * at(x0, y0).xx + w10 * at(x1, y0).xx + w01 * at(x0, y1).xx + w11 * at(x1, y1).xx;
  t.xy = w00 * at(x0, y0).xy + w10 * at(x1, y0).xy + w01 * at(x0, y1).xy + w11 * at(x1, y1).xy;
  t.yy = w00 * at(x0, y0).yy + w10 * at(x1, y0).yy + w01 * at(x0, y1).yy + w11 * at(x1, y1).yy;
  return t;
}

struct Kernel {
  // Quadratic form of the Gaussian exponent: m(d) = d' Q d (Q symmetric PSD).
  double qxx = 0, qxy = 0, qyy = 0;
  double radius = 1;  // candidate search half-width in low-res pixels
};

Kernel shape_kernel(const Tensor& t, const SRConfig& cfg) {
  const double mean = 0.5 * (t.xx + t.yy);
  const double disc = std::hypot(0.5 * (t.xx - t.yy), t.xy);
  const double l1 = std::max(0.0, mean + disc);
  const double l2 = std::max(0.0, mean - disc);

  const double aniso = detail::kernel_anisotropy(l1, l2, cfg.anisotropy_cap);
  const double flat = std::clamp(1.0 - std::sqrt(l1) / cfg.d_tr + cfg.d_th, 0.0, 1.0);
  const double iso = cfg.k_detail * cfg.k_denoise;
  // Across-edge (dominant gradient) std shrinks, along-edge std stretches;
  // flat regions blend toward the isotropic denoising kernel.
  const double k_across = (1 - flat) * cfg.k_detail / (cfg.k_shrink * aniso) + flat * iso;
  const double k_along = (1 - flat) * cfg.k_detail * cfg.k_stretch * aniso + flat * iso;

  // Eigenvector of l1 (across-edge direction).
  double ex, ey;
  const double v1x = t.xy, v1y = l1 - t.xx;
  const double v2x = l1 - t.yy, v2y = t.xy;
  const double n1 = v1x * v1x + v1y * v1y;
  const double n2 = v2x * v2x + v2y * v2y;
  if (n1 >= n2 && n1 > 0) {
    const double inv = 1.0 / std::sqrt(n1);
    ex = v1x * inv;
    ey = v1y * inv;
  } else if (n2 > 0) {
    const double inv = 1.0 / std::sqrt(n2);
    ex = v2x * inv;
    ey = v2y * inv;
  } else {
    ex = 1;
    ey = 0;
  }

  const double ia = 1.0 / std::max(k_across * k_across, 1e-12);
  const double il = 1.0 / std::max(k_along * k_along, 1e-12);
  Kernel k;
  // e = across direction, p = (-ey, ex) along direction.
  k.qxx = ia * ex * ex + il * ey * ey;
  k.qxy = ia * ex * ey - il * ex * ey;
  k.qyy = ia * ey * ey + il * ex * ex;
  k.radius = std::ceil(3.0 * std::max(k_across, k_along) + 1.0);
  return k;
}

}  // namespace

MergedImage super_resolve(const BlockSum& ref_block, const std::vector<BlockSum>& aux_blocks,
                          const std::vector<PatchFlow>& subpixel_flows, const Image<double>& guide,
                          double guide_effective_frames, const SRConfig& cfg,
                          const MergeConfig& mcfg) {
  cfg.validate();
  mcfg.validate();
  require_same_shape(ref_block.counts, guide, "super_resolve guide");
  if (subpixel_flows.size() != aux_blocks.size())
    throw std::invalid_argument("super_resolve: one sub-pixel flow per aux block required");
  for (const auto& a : aux_blocks) {
    require_same_shape(ref_block.counts, a.counts, "super_resolve blocks");
    if (a.n_frames != ref_block.n_frames)
      throw std::invalid_argument("super_resolve: blocks must hold equal frame counts");
  }
  if (guide_effective_frames <= 0)
    throw std::invalid_argument("super_resolve: guide_effective_frames must be > 0");

  const int w = ref_block.counts.width;
  const int h = ref_block.counts.height;
  const int f = cfg.upsample_factor;
  const double block_n = static_cast<double>(ref_block.n_frames);

  // --- Wiener prefilter of every block against the reference content ---
  std::vector<Image<double>> filtered;
  filtered.reserve(aux_blocks.size() + 1);
  if (mcfg.noise_scale_c == 0.0) {
    filtered.push_back(ref_block.counts);
    for (const auto& a : aux_blocks) filtered.push_back(a.counts);
  } else {
    const auto plan = detail::make_tile_plan(w, h, cfg.tile_size_px, mcfg.tile_overlap);
    Image<double> reference = ref_block.counts;
    double var_ref;
    if (cfg.small_block_mode) {
      // Reference = guide rescaled to block count scale; its variance is the
      // single-block variance divided by guide_frames/block_frames.
      const double scale = block_n / guide_effective_frames;
      reference = guide;
      for (auto& v : reference.data) v *= scale;
      if (mcfg.noise_sigma > 0) {
        var_ref = mcfg.noise_sigma * mcfg.noise_sigma * scale;
      } else {
        double sum = 0;
        for (double c : guide.data) {
          const double p = std::clamp(c / guide_effective_frames, 0.0, 1.0);
          sum += block_n * p * (1.0 - p);
        }
        var_ref = (sum / static_cast<double>(guide.data.size())) * scale;
      }
    } else {
      var_ref = mcfg.noise_sigma > 0 ? mcfg.noise_sigma * mcfg.noise_sigma
                                     : [&] {
                                         const double s = estimate_block_noise_sigma(ref_block);
                                         return s * s;
                                       }();
    }
    const auto ref_spectra = detail::all_tile_spectra(reference, plan);
    auto block_var = [&](const BlockSum& b) {
      if (mcfg.noise_sigma > 0) return mcfg.noise_sigma * mcfg.noise_sigma;
      const double s = estimate_block_noise_sigma(b);
      return s * s;
    };
    if (cfg.small_block_mode) {
      const double s2 = (var_ref + block_var(ref_block)) * plan.spectral_scale;
      filtered.push_back(detail::wiener_blend(ref_block.counts, ref_spectra, plan,
                                              mcfg.noise_scale_c * s2));
    } else {
      filtered.push_back(ref_block.counts);
    }
    for (const auto& a : aux_blocks) {
      const double s2 = (var_ref + block_var(a)) * plan.spectral_scale;
      filtered.push_back(
          detail::wiener_blend(a.counts, ref_spectra, plan, mcfg.noise_scale_c * s2));
    }
  }

  // --- Guide structure tensors (guide normalized to [0,1]) ---
  Image<double> g = guide;
  double gmax = 0;
  for (double v : g.data) gmax = std::max(gmax, v);
  if (gmax > 0)
    for (auto& v : g.data) v /= gmax;
  const auto tensors = tensor_field(g);

  // --- Gather: kernel-regression resample onto the upsampled grid ---
  const int ow = w * f;
  const int oh = h * f;
  MergedImage out;
  out.counts = Image<double>(ow, oh, 0.0);
  out.flags = Image<uint8_t>(ow, oh, uint8_t{0});
  out.effective_frames = block_n;
  out.resolution_scale = f;

  const int n_blocks = static_cast<int>(filtered.size());
  constexpr double kExpCut = 55.0;  // exp(-0.5*55) ~ 1.2e-12

  parallel_for(0, oh, [&](int64_t oy) {
    const double qy = (static_cast<double>(oy) + 0.5) / f - 0.5;
    for (int ox = 0; ox < ow; ++ox) {
      const double qx = (ox + 0.5) / f - 0.5;
      const Kernel kern = shape_kernel(tensor_at(tensors, w, h, qx, qy), cfg);
      const int rad = static_cast<int>(kern.radius);

      double wsum = 0, vsum = 0;
      double best_m = std::numeric_limits<double>::infinity();
      double best_v = 0;
      for (int b = 0; b < n_blocks; ++b) {
        double rx = 0, ry = 0;
        if (b > 0) {
          const PatchFlow& res = subpixel_flows[static_cast<size_t>(b - 1)];
          const int pi = std::clamp(static_cast<int>(std::floor(qx / res.patch_size_px)), 0,
                                    res.grid_w - 1);
          const int pj = std::clamp(static_cast<int>(std::floor(qy / res.patch_size_px)), 0,
                                    res.grid_h - 1);
          const auto uv = res.at(pi, pj);
          rx = uv[0];
          ry = uv[1];
        }
        // Low-res pixel (x, y) of this block samples the scene at (x-rx, y-ry).
        const int ylo = std::max(0, static_cast<int>(std::ceil(qy + ry)) - rad);
        const int yhi = std::min(h - 1, static_cast<int>(std::floor(qy + ry)) + rad);
        const int xlo = std::max(0, static_cast<int>(std::ceil(qx + rx)) - rad);
        const int xhi = std::min(w - 1, static_cast<int>(std::floor(qx + rx)) + rad);
        const Image<double>& img = filtered[static_cast<size_t>(b)];
        for (int y = ylo; y <= yhi; ++y) {
          const double dy = y - ry - qy;
          for (int x = xlo; x <= xhi; ++x) {
            const double dx = x - rx - qx;
            const double m = kern.qxx * dx * dx + 2.0 * kern.qxy * dx * dy + kern.qyy * dy * dy;
            const double v = img.at(x, y);
            if (m < best_m) {
              best_m = m;
              best_v = v;
            }
            if (m > kExpCut) continue;
            const double wt = std::exp(-0.5 * m);
            wsum += wt;
            vsum += wt * v;
          }
        }
      }
      if (wsum > 0) {
        out.counts.at(ox, static_cast<int>(oy)) = std::max(vsum / wsum, 0.0);
      } else {
        out.counts.at(ox, static_cast<int>(oy)) = std::max(best_v, 0.0);
        out.flags.at(ox, static_cast<int>(oy)) |= 1;
      }
    }
  });
  return out;
}

}  // namespace qbp
