#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "qbp/sensor.hpp"

namespace qbp {

/// Grid specification for the SNR-difference surface over (flux, speed).
struct SnrGridSpec {
  std::vector<double> flux_grid;   // photons/s, positive, ascending
  std::vector<double> speed_grid;  // apparent speed, px/s, nonnegative, ascending
  SensorSpec quanta_spec;
  SensorSpec conv_spec;
  // Auto-exposure targets: photon budget, total and per-frame motion limits.
  double target_count = 1000.0;
  double max_total_motion_px = 60.0;
  double max_per_frame_motion_px = 1.0;
};

struct SnrPoint {
  double phi = 0, v = 0;
  double exposure_s = 0;          // auto-exposed total T
  int n_quanta = 0, n_conv = 0;   // frame budgets within T
  double snr_quanta_db = 0, snr_conv_db = 0, diff_db = 0;
  bool valid = false;             // false: exposure plan infeasible at this point
};

struct DrSpec {
  std::vector<double> exposure_grid;  // total exposure, seconds, ascending
  std::vector<double> quanta_rates_fps{97700.0};
  std::vector<double> conv_rates_fps{1000.0};
  double snr_floor_db = 0.0;  // flux is "measurable" at or above this SNR
};

struct DrResult {
  double phi_min = 0, phi_max = 0, dr_db = 0;
  int n_frames = 0;
};

struct DrPoint {
  double exposure_s = 0;
  std::string sensor;  // "quanta" or "conv"
  double frame_rate_fps = 0;
  int n_frames = 0;
  double phi_min = 0, phi_max = 0, dr_db = 0;
  bool valid = false;  // false: DR undefined (e.g. single-frame quanta exposure)
};

struct DrCrossover {
  double quanta_rate_fps = 0, conv_rate_fps = 0;
  double crossover_exposure_s = 0;  // first exposure where quanta DR >= conventional DR
  bool found = false;
};

struct DrTable {
  std::vector<DrPoint> points;
  std::vector<DrCrossover> crossovers;
};

/// 20*log10(phi/rmse); both arguments must be positive.
double snr_db(double phi, double rmse);

/// For every (flux, speed) grid point: auto-expose, evaluate both closed-form
/// RMSEs over the planned frame budgets, and report SNRs plus their
/// difference (quanta minus conventional, dB). Row order: flux-major.
std::vector<SnrPoint> snr_surface(const SnrGridSpec& grid);

/// Dynamic range at a total exposure: DR = 20*log10(phi_max/phi_min).
/// Binary sensors: phi_max from a full sequence reading n-1 of n frames;
/// n < 2 is an error. Conventional: phi_max from expected per-frame count =
/// full_well - 1. phi_min = smallest flux whose SNR reaches snr_floor_db
/// (bisection over [1e-3, 1e12], 1e-6 relative tolerance).
DrResult dynamic_range_details(const SensorSpec& spec, double total_exposure_s,
                               double frame_rate_fps, double snr_floor_db = 0.0);
double dynamic_range_db(const SensorSpec& spec, double total_exposure_s, double frame_rate_fps,
                        double snr_floor_db = 0.0);

/// DR-vs-exposure table for both sensors across their frame-rate lists, plus
/// the quanta-vs-conventional crossover exposure per rate pair (linear
/// interpolation between grid points). Undefined grid points are marked
/// invalid, not fatal.
DrTable dr_curves(const SensorSpec& quanta_spec, const SensorSpec& conv_spec, const DrSpec& spec);

/// CSV emission: header row naming all columns, one row per grid point, fixed
/// row order, locale-independent %.9g number formatting.
void write_snr_csv(std::ostream& os, const std::vector<SnrPoint>& rows);
void write_snr_csv(const std::string& path, const std::vector<SnrPoint>& rows);
void write_dr_csv(std::ostream& os, const DrTable& table);
void write_dr_csv(const std::string& path, const DrTable& table);

}  // namespace qbp
