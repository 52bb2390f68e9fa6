#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "qbp/io.hpp"
#include "qbp/qbs.hpp"
#include "qbp/sensor.hpp"
#include "qbp/simulate.hpp"

namespace qbp::cli {

const char* kSimulateKeyHelp =
    "Config keys (key = value per line, '#' comments):\n"
    "  flux                    path to ground-truth flux image (.pfm/.pgm), required\n"
    "  preset                  sensor preset: spad-swiss2 | conv-machinevision |\n"
    "                          conv-iphone7 | jot (default spad-swiss2)\n"
    "  bit_depth               ADC bits override\n"
    "  pde                     detection efficiency override for the active channel\n"
    "  read_noise_e            RMS read noise override, electrons\n"
    "  dark_rate               dark rate override (cps, or e-/s for conventional)\n"
    "  frame_rate_fps          frame rate override\n"
    "  full_well_e             conventional full-well override, electrons\n"
    "  channel                 active color channel 0..2 (default 1)\n"
    "  n_frames                frame count (required unless auto_exposure=1)\n"
    "  auto_exposure           1: derive frame count from the exposure plan\n"
    "  target_count            auto-exposure photon budget c_t (default 1000)\n"
    "  max_total_motion_px     auto-exposure total motion cap (default 60)\n"
    "  max_per_frame_motion_px auto-exposure per-frame motion cap (default 1)\n"
    "  velocity_x, velocity_y  scene translation, px/s (default 0)\n"
    "  jitter_amplitude_px     handheld-jitter amplitude (default 0)\n"
    "  jitter_period_s         jitter period (default 0.01)\n"
    "  jitter_seed             jitter phase seed (default 0)\n"
    "  boundary_fill           flux outside the original frame (default 0)\n"
    "  jot_oversample          jot spatial oversampling factor K (default 1)\n"
    "  dcr_map                 path to per-pixel dark-count-rate image (.pfm, cps)\n"
    "  hot_threshold_cps       DCR above this marks a pixel hot (with dcr_map)\n"
    "  seed                    RNG seed (overridden by --seed)\n";

namespace {

SensorSpec spec_from_config(const Config& cfg, const CommonFlags& flags) {
  const std::string preset =
      flags.preset ? *flags.preset : cfg.get_str("preset", "spad-swiss2");
  SensorSpec spec = sensor_preset(preset);
  if (cfg.has("bit_depth")) spec.bit_depth = cfg.get_int("bit_depth", spec.bit_depth);
  if (cfg.has("channel")) spec.active_channel = cfg.get_int("channel", spec.active_channel);
  if (cfg.has("pde"))
    spec.pde[static_cast<size_t>(spec.active_channel)] =
        cfg.get_num("pde", spec.eta());
  if (cfg.has("read_noise_e")) spec.read_noise_e = cfg.get_num("read_noise_e", spec.read_noise_e);
  if (cfg.has("dark_rate")) spec.dark_rate = cfg.get_num("dark_rate", spec.dark_rate);
  if (cfg.has("frame_rate_fps"))
    spec.frame_rate_fps = cfg.get_num("frame_rate_fps", spec.frame_rate_fps);
  if (cfg.has("full_well_e")) spec.full_well_e = cfg.get_num("full_well_e", spec.full_well_e);
  spec.validate();
  return spec;
}

std::string kv_line(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return key + "=" + buf + "\n";
}

}  // namespace

int cmd_simulate(const Config& cfg, const CommonFlags& flags) {
  cfg.require_known({"flux",
                     "preset",
                     "bit_depth",
                     "pde",
                     "read_noise_e",
                     "dark_rate",
                     "frame_rate_fps",
                     "full_well_e",
                     "channel",
                     "n_frames",
                     "auto_exposure",
                     "target_count",
                     "max_total_motion_px",
                     "max_per_frame_motion_px",
                     "velocity_x",
                     "velocity_y",
                     "jitter_amplitude_px",
                     "jitter_period_s",
                     "jitter_seed",
                     "boundary_fill",
                     "jot_oversample",
                     "dcr_map",
                     "hot_threshold_cps",
                     "seed"});
  if (flags.out.empty()) throw UsageError("simulate requires --out <file.qbs>");
  if (!cfg.has("flux")) throw UsageError("config key 'flux' is required");

  const FluxImage flux = read_flux_image(cfg.get_str("flux", ""));
  const SensorSpec spec = spec_from_config(cfg, flags);
  const uint64_t seed = flags.seed ? *flags.seed : cfg.get_u64("seed", 0);

  MotionTrajectory traj;
  traj.kind = MotionTrajectory::Kind::GlobalTranslation;
  traj.velocity_px_per_s = {cfg.get_num("velocity_x", 0.0), cfg.get_num("velocity_y", 0.0)};
  traj.jitter_amplitude_px = cfg.get_num("jitter_amplitude_px", 0.0);
  traj.jitter_period_s = cfg.get_num("jitter_period_s", 0.01);
  traj.jitter_seed = cfg.get_u64("jitter_seed", 0);
  traj.boundary_fill = cfg.get_num("boundary_fill", 0.0);
  traj.frame_period_s = spec.exposure_s();

  std::optional<ExposurePlan> plan;
  int n_frames;
  if (cfg.get_flag("auto_exposure", false)) {
    double mean = 0;
    for (double v : flux.data) mean += v;
    mean /= static_cast<double>(flux.data.size());
    const double v = std::hypot(traj.velocity_px_per_s[0], traj.velocity_px_per_s[1]);
    plan = plan_exposure(mean, v, spec, cfg.get_num("target_count", 1000.0),
                         cfg.get_num("max_total_motion_px", 60.0),
                         cfg.get_num("max_per_frame_motion_px", 1.0));
    n_frames = plan->n_frames;
  } else {
    n_frames = cfg.get_int("n_frames", 0);
    if (n_frames < 1) throw UsageError("config key 'n_frames' (>= 1) or auto_exposure=1 required");
  }

  std::optional<DcrMap> dcr;
  if (cfg.has("dcr_map")) {
    DcrMap map;
    map.dcr_cps = read_pfm(cfg.get_str("dcr_map", ""));
    const double threshold =
        cfg.get_num("hot_threshold_cps", std::numeric_limits<double>::infinity());
    map.hot_mask = Image<uint8_t>(map.dcr_cps.width, map.dcr_cps.height, uint8_t{0});
    for (size_t i = 0; i < map.dcr_cps.data.size(); ++i)
      if (map.dcr_cps.data[i] > threshold) map.hot_mask.data[i] = 1;
    dcr = std::move(map);
  }

  FrameSequence seq;
  switch (spec.kind) {
    case SensorKind::Spad:
      seq = sample_spad_sequence(flux, spec, traj, n_frames, dcr, seed);
      break;
    case SensorKind::Jot:
      seq = sample_jot_sequence(flux, spec, traj, n_frames, cfg.get_int("jot_oversample", 1),
                                seed);
      break;
    case SensorKind::Conventional: {
      ExposurePlan p;
      if (plan) {
        p = *plan;
      } else {
        p.n_frames = n_frames;
        p.total_exposure_s = n_frames * spec.exposure_s();
      }
      seq = emulate_conventional_burst(flux, spec, traj, p, seed);
      break;
    }
  }

  seq.extra_metadata += kv_line("velocity_x", traj.velocity_px_per_s[0]);
  seq.extra_metadata += kv_line("velocity_y", traj.velocity_px_per_s[1]);
  if (traj.jitter_amplitude_px > 0) {
    seq.extra_metadata += kv_line("jitter_amplitude_px", traj.jitter_amplitude_px);
    seq.extra_metadata += kv_line("jitter_period_s", traj.jitter_period_s);
    seq.extra_metadata += "jitter_seed=" + std::to_string(traj.jitter_seed) + "\n";
  }
  if (plan) {
    seq.extra_metadata += kv_line("plan_total_exposure_s", plan->total_exposure_s);
    seq.extra_metadata += "plan_n_frames=" + std::to_string(plan->n_frames) + "\n";
    seq.extra_metadata += kv_line("plan_target_count", plan->target_count);
    seq.extra_metadata += kv_line("plan_max_total_motion_px", plan->max_total_motion_px);
    seq.extra_metadata += kv_line("plan_max_per_frame_motion_px", plan->max_per_frame_motion_px);
    seq.extra_metadata += kv_line("plan_mean_flux", plan->mean_flux);
    seq.extra_metadata += kv_line("plan_speed_px_per_s", plan->apparent_speed_px_per_s);
  }

  write_qbs(flags.out, seq);
  std::cout << "wrote " << flags.out << ": " << seq.width() << "x" << seq.height() << ", "
            << seq.n_frames() << " frames, bit depth " << seq.bit_depth() << ", seed " << seed
            << "\n";
  return 0;
}

}  // namespace qbp::cli
