#pragma once

#include <optional>
#include <vector>

#include "qbp/align.hpp"
#include "qbp/frame_sequence.hpp"
#include "qbp/image.hpp"

namespace qbp {

struct MergeConfig {
  int merge_block_size = 0;   // 0 = reuse the align block size
  int tile_size_px = 16;      // power of two
  double tile_overlap = 0.5;  // 0 (butted tiles) or 0.5 (raised-cosine window)
  // Shrinkage strength c of the Wiener weight A = |D|^2/(|D|^2 + c*sigma^2).
  // c = 0 disables shrinkage entirely: the output is the plain sum of all
  // blocks. The default is calibrated so aligned static blocks average nearly
  // ideally while unrelated content is rejected.
  double noise_scale_c = 16.0;
  // Per-pixel noise sigma override applied to every block. <= 0 selects the
  // model estimate (per-block mean binomial variance).
  double noise_sigma = 0.0;
  bool interpolate_frame_flows = true;  // false: hold each block's flow constant

  void validate() const;
};

struct SRConfig {
  int upsample_factor = 2;
  double k_detail = 0.3;
  double k_denoise = 1.0;
  double d_th = 0.005;
  double d_tr = 0.5;
  double k_stretch = 1.0;
  double k_shrink = 1.0;
  int tile_size_px = 16;     // Wiener prefilter tile (8 or 16)
  double anisotropy_cap = 5.0;
  bool small_block_mode = false;  // Wiener reference = guide with rescaled sigma

  void validate() const;
};

struct MergedImage {
  Image<double> counts;        // nonnegative real photon counts
  double effective_frames = 0; // count normalization for MLE inversion
  int resolution_scale = 1;
  Image<uint8_t> flags;        // bit 0: kernel-regression nearest-sample fallback
};

/// Scatters every frame of [first, first+count) forward into the reference
/// grid (bilinear weights, counts conserved except at borders) using that
/// frame's patch flow, and sums. frame_flows is indexed by absolute frame.
BlockSum warp_and_sum_block(const FrameSequence& seq, int first, int count,
                            const std::vector<PatchFlow>& frame_flows);

/// Per-pixel noise sigma of a block-sum image from the binomial model:
/// sigma^2 = mean over pixels of n*p(1-p), p = counts/n.
double estimate_block_noise_sigma(const BlockSum& block);

/// Frequency-domain robust merge. Per overlapping tile, per frequency:
///   merged = ref + sum_i [ aux_i + A_i*(ref - aux_i) ]
///   A_i = |D_i|^2 / (|D_i|^2 + c*sigma_i^2),  D_i = ref - aux_i
/// so blocks differing from the reference beyond the noise floor are replaced
/// by reference content. sigma_i^2 = (per-pixel variance of ref + of aux_i) *
/// tile pixel count, the spectral normalization of white per-pixel noise
/// under the unnormalized-FFT convention. With c = 0 shrinkage is
/// disabled and the result is the plain sum of all blocks.
/// effective_frames = (1 + n_aux) * block frame count.
MergedImage wiener_merge(const BlockSum& ref_block, const std::vector<BlockSum>& aux_blocks,
                         const MergeConfig& cfg);

/// Kernel-regression super-resolution. Blocks are Wiener-prefiltered against
/// the reference (or, in small-block mode, the guide rescaled to block count
/// scale with variance divided by guide_frames/block_frames). Every pixel of
/// every filtered block becomes a sample at its sub-pixel position (pixel
/// minus the block's per-patch residual flow), mapped onto the upsampled
/// grid; output = sum(w_i * s_i)/sum(w_i) with anisotropic Gaussian weights
/// shaped by the guide's structure tensor: anisotropy A = 1 + min(sqrt(l1/l2),
/// cap), kernel stds k_detail/(k_shrink*A) across edges and
/// k_detail*k_stretch*A along them, blended toward the isotropic
/// k_detail*k_denoise by the flatness factor clamp(1 - sqrt(l1)/D_tr + D_th).
/// subpixel_flows[i] belongs to aux_blocks[i]; the reference residual is zero.
MergedImage super_resolve(const BlockSum& ref_block, const std::vector<BlockSum>& aux_blocks,
                          const std::vector<PatchFlow>& subpixel_flows, const Image<double>& guide,
                          double guide_effective_frames, const SRConfig& cfg,
                          const MergeConfig& mcfg);

struct PipelineDebug {
  std::vector<PatchFlow> block_flows;  // one per align block (reference included, zero)
  int ref_block_index = 0;
  int ref_frame_index = 0;
};

/// Full merge chain: block_sums -> hierarchical_align + regularize_flow ->
/// interpolate_flow -> warp_and_sum_block per merge block -> wiener_merge
/// (or super_resolve when sr is given). Reference block = center block.
MergedImage merge_pipeline(const FrameSequence& seq, const AlignConfig& align_cfg,
                           const MergeConfig& merge_cfg,
                           const std::optional<SRConfig>& sr = std::nullopt,
                           PipelineDebug* debug = nullptr);

}  // namespace qbp
