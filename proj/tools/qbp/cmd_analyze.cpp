#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "qbp/analysis.hpp"
#include "qbp/sensor.hpp"

namespace qbp::cli {

const char* kAnalyzeKeyHelp =
    "Config keys (key = value per line, '#' comments):\n"
    "  preset_quanta           quanta sensor preset (default spad-swiss2)\n"
    "  preset_conv             conventional sensor preset (default conv-machinevision)\n"
    "  full_well_e             conventional full-well override, electrons\n"
    "snr grids (explicit lists take precedence over generators):\n"
    "  flux_grid               comma-separated flux values, photons/s\n"
    "  flux_log10_min/max      log10 flux range (defaults 0, 7)\n"
    "  flux_points             log-spaced point count (default 15)\n"
    "  speed_grid              comma-separated speeds, px/s\n"
    "  speed_max               top of linear speed range from 0 (default 1e4)\n"
    "  speed_points            speed point count (default 11)\n"
    "  target_count            auto-exposure photon budget (default 1000)\n"
    "  max_total_motion_px     auto-exposure total motion cap (default 60)\n"
    "  max_per_frame_motion_px auto-exposure per-frame cap (default 1)\n"
    "dr grids:\n"
    "  exposure_grid           comma-separated exposures, seconds\n"
    "  exposure_log10_min/max  log10 exposure range (defaults -3, 1)\n"
    "  exposure_points         log-spaced point count (default 41)\n"
    "  quanta_rates            comma-separated quanta frame rates (default 97700)\n"
    "  conv_rates              comma-separated conventional rates (default 1000)\n"
    "  snr_floor_db            measurability threshold (default 0)\n";

namespace {

std::vector<double> log_grid(double lo_log10, double hi_log10, int points) {
  if (points < 1) throw UsageError("grid point count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out.push_back(std::pow(10.0, lo_log10 + t * (hi_log10 - lo_log10)));
  }
  return out;
}

std::vector<double> lin_grid(double lo, double hi, int points) {
  if (points < 1) throw UsageError("grid point count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out.push_back(lo + t * (hi - lo));
  }
  return out;
}

}  // namespace

int cmd_analyze(const std::string& kind, const Config& cfg, const CommonFlags& flags) {
  if (kind != "snr" && kind != "dr") throw UsageError("analyze kind must be 'snr' or 'dr'");
  if (flags.out.empty()) throw UsageError("analyze requires --out <file.csv>");

  SensorSpec quanta = sensor_preset(cfg.get_str("preset_quanta", "spad-swiss2"));
  SensorSpec conv = sensor_preset(cfg.get_str("preset_conv", "conv-machinevision"));
  if (cfg.has("full_well_e")) conv.full_well_e = cfg.get_num("full_well_e", conv.full_well_e);

  if (kind == "snr") {
    cfg.require_known({"preset_quanta", "preset_conv", "full_well_e", "flux_grid",
                       "flux_log10_min", "flux_log10_max", "flux_points", "speed_grid",
                       "speed_max", "speed_points", "target_count", "max_total_motion_px",
                       "max_per_frame_motion_px"});
    SnrGridSpec grid;
    grid.quanta_spec = quanta;
    grid.conv_spec = conv;
    grid.flux_grid = cfg.get_list("flux_grid");
    if (grid.flux_grid.empty())
      grid.flux_grid = log_grid(cfg.get_num("flux_log10_min", 0.0),
                                cfg.get_num("flux_log10_max", 7.0), cfg.get_int("flux_points", 15));
    grid.speed_grid = cfg.get_list("speed_grid");
    if (grid.speed_grid.empty())
      grid.speed_grid = lin_grid(0.0, cfg.get_num("speed_max", 1e4),
                                 cfg.get_int("speed_points", 11));
    grid.target_count = cfg.get_num("target_count", 1000.0);
    grid.max_total_motion_px = cfg.get_num("max_total_motion_px", 60.0);
    grid.max_per_frame_motion_px = cfg.get_num("max_per_frame_motion_px", 1.0);

    const auto rows = snr_surface(grid);
    write_snr_csv(flags.out, rows);
    int valid = 0;
    for (const auto& r : rows) valid += r.valid ? 1 : 0;
    std::cout << "wrote " << flags.out << ": " << rows.size() << " rows (" << valid
              << " valid)\n";
    return 0;
  }

  cfg.require_known({"preset_quanta", "preset_conv", "full_well_e", "exposure_grid",
                     "exposure_log10_min", "exposure_log10_max", "exposure_points",
                     "quanta_rates", "conv_rates", "snr_floor_db"});
  DrSpec spec;
  spec.exposure_grid = cfg.get_list("exposure_grid");
  if (spec.exposure_grid.empty())
    spec.exposure_grid =
        log_grid(cfg.get_num("exposure_log10_min", -3.0), cfg.get_num("exposure_log10_max", 1.0),
                 cfg.get_int("exposure_points", 41));
  if (cfg.has("quanta_rates")) spec.quanta_rates_fps = cfg.get_list("quanta_rates");
  if (cfg.has("conv_rates")) spec.conv_rates_fps = cfg.get_list("conv_rates");
  spec.snr_floor_db = cfg.get_num("snr_floor_db", 0.0);

  const DrTable table = dr_curves(quanta, conv, spec);
  write_dr_csv(flags.out, table);
  std::cout << "wrote " << flags.out << ": " << table.points.size() << " rows\n";
  for (const auto& x : table.crossovers) {
    std::cout << "crossover quanta " << x.quanta_rate_fps << " fps vs conv " << x.conv_rate_fps
              << " fps: ";
    if (x.found)
      std::cout << x.crossover_exposure_s << " s\n";
    else
      std::cout << "none within the exposure grid\n";
  }
  return 0;
}

}  // namespace qbp::cli
