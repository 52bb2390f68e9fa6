#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "commands.hpp"
#include "qbp/align.hpp"
#include "qbp/io.hpp"
#include "qbp/merge.hpp"
#include "qbp/qbs.hpp"
#include "qbp/reconstruct.hpp"

namespace qbp::cli {

const char* kPipelineKeyHelp =
    "Config keys (key = value per line, '#' comments):\n"
    "  block_size              frames per alignment block (default 100)\n"
    "  merge_block_size        frames per merge block (default: block_size)\n"
    "  patch_size              alignment patch size, px (default 16)\n"
    "  levels                  alignment pyramid levels (default 3)\n"
    "  search_radius           per-level search radius, px (default 4)\n"
    "  lambda                  flow regularization weight (default 0 = off)\n"
    "  charbonnier_eps         regularization loss smoothing (default 1e-3)\n"
    "  reg_iterations          regularization descent budget (default 60)\n"
    "  c                       Wiener shrinkage strength (default 8; 0 = plain sum)\n"
    "  tile_size               Wiener tile size, power of two (default 16)\n"
    "  tile_overlap            tile overlap fraction, 0 or 0.5 (default 0.5)\n"
    "  noise_sigma             per-pixel noise sigma override (default 0 = model)\n"
    "  interpolate_frames      1: per-frame flow interpolation (default 1)\n"
    "  sr                      super-resolution factor (default 0 = off)\n"
    "  k_detail, k_denoise     SR kernel gains (defaults 0.3, 1.0)\n"
    "  d_th, d_tr              SR flatness threshold/transition (0.005, 0.5)\n"
    "  k_stretch, k_shrink     SR anisotropy gains (defaults 1, 1)\n"
    "  sr_tile_size            SR Wiener prefilter tile (default 16)\n"
    "  anisotropy_cap          SR anisotropy bound (default 5)\n"
    "  small_block_mode        1: SR Wiener reference = rescaled guide (default 0)\n"
    "  gamma                   display gamma (default 2.2)\n"
    "  percentile              display normalization percentile (default 99.9)\n"
    "  use_anscombe            1: stabilize + denoise + invert before MLE (default 0)\n"
    "  denoise_sigma           Gaussian denoiser sigma (with use_anscombe)\n"
    "  dcr_map                 per-pixel DCR image (.pfm) for hot-pixel correction\n"
    "  hot_threshold_cps       DCR above this marks a pixel hot (default 1000)\n"
    "  naive                   1: plain sum, no alignment (same as --naive)\n"
    "  seed                    hot-pixel correction seed (overridden by --seed)\n";

namespace {

void write_flow_csv(const std::string& path, const std::vector<PatchFlow>& flows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "block,center_frame,patch_i,patch_j,u,v\n";
  char buf[96];
  for (size_t b = 0; b < flows.size(); ++b) {
    const PatchFlow& f = flows[b];
    for (int j = 0; j < f.grid_h; ++j)
      for (int i = 0; i < f.grid_w; ++i) {
        const auto uv = f.at(i, j);
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%.9g,%.9g\n", b, f.timestamp, i, j, uv[0],
                      uv[1]);
        os << buf;
      }
  }
}

}  // namespace

int cmd_pipeline(const std::string& seq_path, const Config& cfg, const CommonFlags& flags) {
  cfg.require_known({"block_size",    "merge_block_size", "patch_size",
                     "levels",        "search_radius",    "lambda",
                     "charbonnier_eps", "reg_iterations", "c",
                     "tile_size",     "tile_overlap",     "noise_sigma",
                     "interpolate_frames", "sr",          "k_detail",
                     "k_denoise",     "d_th",             "d_tr",
                     "k_stretch",     "k_shrink",         "sr_tile_size",
                     "anisotropy_cap", "small_block_mode", "gamma",
                     "percentile",    "use_anscombe",     "denoise_sigma",
                     "dcr_map",       "hot_threshold_cps", "naive",
                     "seed"});
  if (flags.out.empty()) throw UsageError("pipeline requires --out <prefix>");

  FrameSequence seq = read_qbs(seq_path);

  AlignConfig acfg;
  acfg.block_size_frames =
      flags.block_size ? *flags.block_size : cfg.get_int("block_size", acfg.block_size_frames);
  acfg.patch_size_px =
      flags.patch_size ? *flags.patch_size : cfg.get_int("patch_size", acfg.patch_size_px);
  acfg.pyramid_levels = flags.levels ? *flags.levels : cfg.get_int("levels", acfg.pyramid_levels);
  acfg.search_radius_px.assign(static_cast<size_t>(acfg.pyramid_levels),
                               cfg.get_int("search_radius", 4));
  acfg.lambda_reg = flags.lambda_reg ? *flags.lambda_reg : cfg.get_num("lambda", acfg.lambda_reg);
  acfg.charbonnier_eps = cfg.get_num("charbonnier_eps", acfg.charbonnier_eps);
  acfg.reg_iterations = cfg.get_int("reg_iterations", acfg.reg_iterations);

  MergeConfig mcfg;
  mcfg.merge_block_size = flags.merge_block_size ? *flags.merge_block_size
                                                 : cfg.get_int("merge_block_size", 0);
  mcfg.tile_size_px = cfg.get_int("tile_size", mcfg.tile_size_px);
  mcfg.tile_overlap = cfg.get_num("tile_overlap", mcfg.tile_overlap);
  mcfg.noise_scale_c =
      flags.noise_scale_c ? *flags.noise_scale_c : cfg.get_num("c", mcfg.noise_scale_c);
  mcfg.noise_sigma = cfg.get_num("noise_sigma", mcfg.noise_sigma);
  mcfg.interpolate_frame_flows = cfg.get_flag("interpolate_frames", true);

  const int sr_factor = flags.sr_factor ? *flags.sr_factor : cfg.get_int("sr", 0);
  std::optional<SRConfig> sr;
  if (sr_factor > 0) {
    SRConfig s;
    s.upsample_factor = sr_factor;
    s.k_detail = cfg.get_num("k_detail", s.k_detail);
    s.k_denoise = cfg.get_num("k_denoise", s.k_denoise);
    s.d_th = cfg.get_num("d_th", s.d_th);
    s.d_tr = cfg.get_num("d_tr", s.d_tr);
    s.k_stretch = cfg.get_num("k_stretch", s.k_stretch);
    s.k_shrink = cfg.get_num("k_shrink", s.k_shrink);
    s.tile_size_px = cfg.get_int("sr_tile_size", s.tile_size_px);
    s.anisotropy_cap = cfg.get_num("anisotropy_cap", s.anisotropy_cap);
    s.small_block_mode = cfg.get_flag("small_block_mode", s.small_block_mode);
    sr = s;
  }

  if (seq.n_frames() < acfg.block_size_frames)
    throw std::invalid_argument("sequence shorter than one alignment block");

  const uint64_t seed = flags.seed ? *flags.seed : cfg.get_u64("seed", 0);
  if (cfg.has("dcr_map")) {
    DcrMap map;
    map.dcr_cps = read_pfm(cfg.get_str("dcr_map", ""));
    const double threshold = cfg.get_num("hot_threshold_cps", 1000.0);
    map.hot_mask = Image<uint8_t>(map.dcr_cps.width, map.dcr_cps.height, uint8_t{0});
    for (size_t i = 0; i < map.dcr_cps.data.size(); ++i)
      if (map.dcr_cps.data[i] > threshold) map.hot_mask.data[i] = 1;
    seq = correct_hot_pixels(seq, map, seed);
  }

  MergedImage merged;
  PipelineDebug debug;
  const bool naive = flags.naive || cfg.get_flag("naive", false);
  if (naive) {
    const SumImage total = sum_all_frames(seq);
    merged.counts = Image<double>(total.counts.width, total.counts.height, 0.0);
    for (size_t i = 0; i < merged.counts.data.size(); ++i)
      merged.counts.data[i] = total.counts.data[i];
    merged.effective_frames = total.n_frames_summed;
    merged.resolution_scale = 1;
    merged.flags = Image<uint8_t>(total.counts.width, total.counts.height, uint8_t{0});
  } else {
    merged = merge_pipeline(seq, acfg, mcfg, sr, &debug);
  }

  const bool use_anscombe = cfg.get_flag("use_anscombe", false);
  const Denoiser denoiser =
      use_anscombe ? gaussian_denoiser(cfg.get_num("denoise_sigma", 1.0)) : Denoiser{};
  const FinalImage final_image =
      finalize_image(merged, seq.spec, cfg.get_num("gamma", 2.2), denoiser,
                     cfg.get_num("percentile", 99.9));

  write_pfm(flags.out + "_sum.pfm", merged.counts);
  Image<double> linear(final_image.flux.width, final_image.flux.height, 0.0);
  if (final_image.normalization > 0)
    for (size_t i = 0; i < linear.data.size(); ++i)
      linear.data[i] = final_image.flux.data[i] / final_image.normalization;
  write_pgm16(flags.out + "_linear.pgm", linear);
  write_pgm8(flags.out + "_display.pgm", final_image.display);
  write_flow_csv(flags.out + "_flow.csv", debug.block_flows);

  std::cout << "wrote " << flags.out << "_{sum.pfm,linear.pgm,display.pgm,flow.csv}: "
            << merged.counts.width << "x" << merged.counts.height << ", effective frames "
            << merged.effective_frames << ", normalization " << final_image.normalization
            << " photons/s\n";
  return 0;
}

}  // namespace qbp::cli
