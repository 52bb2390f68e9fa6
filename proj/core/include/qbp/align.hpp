#pragma once

#include <array>
#include <vector>

#include "qbp/frame_sequence.hpp"
#include "qbp/image.hpp"

namespace qbp {

struct AlignConfig {
  int block_size_frames = 100;       // temporal block length (typical 100-500)
  int patch_size_px = 16;            // M: 8, 16 or 32
  int pyramid_levels = 3;
  std::vector<int> search_radius_px = {4, 4, 4};  // one entry per level (finest first)
  double lambda_reg = 0.0;           // coupling weight of the flow-gradient term
  double charbonnier_eps = 1e-3;
  int reg_iterations = 60;           // gradient-descent budget for regularize_flow
  double reg_initial_step_px = 0.5;  // initial per-iteration max displacement

  int radius_at(int level) const {
    if (search_radius_px.empty()) return 4;
    const auto i = static_cast<size_t>(level);
    return i < search_radius_px.size() ? search_radius_px[i] : search_radius_px.back();
  }
};

/// Temporal block of frames summed per pixel. Counts are real-valued so the
/// same type carries plain sums (integers) and warped sums (bilinear splats).
struct BlockSum {
  Image<double> counts;
  int n_frames = 0;
  int start_frame = 0;   // first frame of the block
  int center_frame = 0;  // start_frame + n_frames/2 (flow timestamp)
};

/// Per-patch translation field. Grid cell (i,j) covers pixels
/// [i*M, (i+1)*M) x [j*M, (j+1)*M), clamped at the image border.
struct PatchFlow {
  enum class Granularity { Block, Frame };
  int patch_size_px = 16;
  int grid_w = 0, grid_h = 0;
  std::vector<std::array<double, 2>> uv;  // row-major (j*grid_w + i)
  int timestamp = 0;                      // block-center or frame index
  Granularity granularity = Granularity::Block;
  bool non_convergence_warning = false;

  std::array<double, 2>& at(int i, int j) { return uv[static_cast<size_t>(j) * grid_w + i]; }
  const std::array<double, 2>& at(int i, int j) const {
    return uv[static_cast<size_t>(j) * grid_w + i];
  }
};

PatchFlow make_zero_flow(int image_w, int image_h, int patch_size, int timestamp);

/// Splits the sequence into non-overlapping temporal blocks of block_size
/// frames; a partial trailing block is dropped.
std::vector<BlockSum> block_sums(const FrameSequence& seq, int block_size);

/// L1 patch match: returns the integer (u,v) in the window init +- radius
/// minimizing sum |aux(x+u, y+v) - ref(x, y)| over patch (i,j); out-of-bounds
/// reads are border-clamped. Ties: smallest L2 norm, then lexicographic (u,v).
struct MatchResult {
  int u = 0, v = 0;
  double e_d = 0.0;
};
MatchResult match_patch(const Image<double>& ref, const Image<double>& aux, int i, int j,
                        int patch_size, int search_radius, std::array<int, 2> init);

/// Coarse-to-fine block matching: 2x2 box-mean pyramid, match at the coarsest
/// level, double the flow as initialization for the next, finish at full
/// resolution. Flow granularity is block level.
PatchFlow hierarchical_align(const BlockSum& ref, const BlockSum& aux, const AlignConfig& cfg);

/// Sub-pixel refinement at the finest level: minimizes
///   sum_patches E_d(u,v) + lambda * sum (rho(grad u) + rho(grad v))
/// with Charbonnier rho replacing both L1 terms, bilinear sub-patch sampling,
/// forward differences on the patch grid, and fixed-budget gradient descent
/// with step halving. Sets non_convergence_warning instead of failing.
PatchFlow regularize_flow(const PatchFlow& flow, const BlockSum& ref, const BlockSum& aux,
                          const AlignConfig& cfg);

/// Evaluates the regularization objective above for a given flow (exposed for
/// testing the monotonicity contract).
double flow_energy(const PatchFlow& flow, const BlockSum& ref, const BlockSum& aux,
                   const AlignConfig& cfg);

/// Linear-in-time interpolation of block-level flows (timestamped at block
/// centers) to every frame in [0, n_frames); constant extrapolation outside
/// the center range. Flows remain relative to the reference frame.
std::vector<PatchFlow> interpolate_flow(const std::vector<PatchFlow>& block_flows, int block_size,
                                        int n_frames, int ref_frame_index);

}  // namespace qbp
