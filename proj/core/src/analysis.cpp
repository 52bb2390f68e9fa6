#include "qbp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "qbp/io.hpp"
#include "qbp/model.hpp"
#include "qbp/parallel.hpp"
#include "qbp/simulate.hpp"

namespace qbp {

namespace {

double sensor_rmse(const SensorSpec& spec, double flux, int n_frames, double exposure_s) {
  if (spec.kind == SensorKind::Conventional)
    return rmse_conventional(flux, n_frames, exposure_s, spec.eta(), spec.dark_rate,
                             spec.read_noise_e);
  return fisher_rmse_quanta(flux, n_frames, exposure_s, spec.eta(), spec.dark_rate);
}

/// Smallest flux whose SNR reaches the floor: bisection on
/// g(phi) = phi - thresh * rmse(phi), which is negative at low flux.
double find_phi_min(const SensorSpec& spec, int n_frames, double exposure_s,
                    double snr_floor_db) {
  const double thresh = std::pow(10.0, snr_floor_db / 20.0);
  auto measurable = [&](double phi) {
    return phi >= thresh * sensor_rmse(spec, phi, n_frames, exposure_s);
  };

  double lo = 1e-3;
  if (measurable(lo)) return lo;  // floor of the search domain
  double hi = lo;
  while (!measurable(hi)) {
    hi *= 2.0;
    if (hi > 1e12) throw std::domain_error("no measurable flux below 1e12 photons/s");
  }
  lo = hi / 2.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-6 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (measurable(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

void fmt(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

}  // namespace

double snr_db(double phi, double rmse) {
  if (!(phi > 0) || !(rmse > 0)) throw std::domain_error("snr_db requires phi, rmse > 0");
  return 20.0 * std::log10(phi / rmse);
}

std::vector<SnrPoint> snr_surface(const SnrGridSpec& grid) {
  if (grid.flux_grid.empty() || grid.speed_grid.empty())
    throw std::invalid_argument("snr_surface: empty grid");
  if (!std::is_sorted(grid.flux_grid.begin(), grid.flux_grid.end()) ||
      !std::is_sorted(grid.speed_grid.begin(), grid.speed_grid.end()))
    throw std::invalid_argument("snr_surface: grids must be ascending");
  for (double phi : grid.flux_grid)
    if (!(phi > 0)) throw std::invalid_argument("snr_surface: flux grid must be positive");
  grid.quanta_spec.validate();
  grid.conv_spec.validate();

  const int nv = static_cast<int>(grid.speed_grid.size());
  std::vector<SnrPoint> rows(grid.flux_grid.size() * grid.speed_grid.size());
  parallel_for(0, static_cast<int64_t>(rows.size()), [&](int64_t idx) {
    SnrPoint& row = rows[static_cast<size_t>(idx)];
    row.phi = grid.flux_grid[static_cast<size_t>(idx / nv)];
    row.v = grid.speed_grid[static_cast<size_t>(idx % nv)];
    try {
      const ExposurePlan conv_plan =
          plan_exposure(row.phi, row.v, grid.conv_spec, grid.target_count,
                        grid.max_total_motion_px, grid.max_per_frame_motion_px);
      const ExposurePlan quanta_plan =
          plan_exposure(row.phi, row.v, grid.quanta_spec, grid.target_count,
                        grid.max_total_motion_px, grid.max_per_frame_motion_px);
      row.exposure_s = conv_plan.total_exposure_s;
      row.n_conv = conv_plan.n_frames;
      row.n_quanta = quanta_plan.n_frames;
      const double tau_c = row.exposure_s / row.n_conv;
      const double tau_q = grid.quanta_spec.exposure_s();
      row.snr_quanta_db =
          snr_db(row.phi, sensor_rmse(grid.quanta_spec, row.phi, row.n_quanta, tau_q));
      row.snr_conv_db = snr_db(row.phi, sensor_rmse(grid.conv_spec, row.phi, row.n_conv, tau_c));
      row.diff_db = row.snr_quanta_db - row.snr_conv_db;
      row.valid = true;
    } catch (const std::exception&) {
      row.valid = false;
      row.snr_quanta_db = row.snr_conv_db = row.diff_db =
          std::numeric_limits<double>::quiet_NaN();
    }
  });
  return rows;
}

DrResult dynamic_range_details(const SensorSpec& spec, double total_exposure_s,
                               double frame_rate_fps, double snr_floor_db) {
  spec.validate();
  if (!(frame_rate_fps > 0)) throw std::invalid_argument("frame rate must be positive");
  const double tau = 1.0 / frame_rate_fps;
  const int n = static_cast<int>(std::floor(total_exposure_s * frame_rate_fps + 1e-9));
  if (n < 1) throw std::domain_error("exposure shorter than one frame");

  DrResult r;
  r.n_frames = n;
  if (spec.kind == SensorKind::Conventional) {
    // Expected per-frame electron count pinned at full_well - 1.
    r.phi_max = ((spec.full_well_e - 1.0) - spec.dark_rate * tau) / (tau * spec.eta());
  } else {
    if (n < 2) throw std::domain_error("binary-sensor dynamic range needs at least 2 frames");
    // Full sequence reading n-1 detections out of n.
    r.phi_max = std::log(static_cast<double>(n)) / (tau * spec.eta()) - spec.dark_rate / spec.eta();
  }
  if (!(r.phi_max > 0)) throw std::domain_error("saturation flux is not positive");
  r.phi_min = find_phi_min(spec, n, tau, snr_floor_db);
  r.dr_db = 20.0 * std::log10(r.phi_max / r.phi_min);
  return r;
}

double dynamic_range_db(const SensorSpec& spec, double total_exposure_s, double frame_rate_fps,
                        double snr_floor_db) {
  return dynamic_range_details(spec, total_exposure_s, frame_rate_fps, snr_floor_db).dr_db;
}

DrTable dr_curves(const SensorSpec& quanta_spec, const SensorSpec& conv_spec, const DrSpec& spec) {
  if (spec.exposure_grid.empty()) throw std::invalid_argument("dr_curves: empty exposure grid");
  if (!std::is_sorted(spec.exposure_grid.begin(), spec.exposure_grid.end()))
    throw std::invalid_argument("dr_curves: exposure grid must be ascending");

  DrTable table;
  auto emit = [&](const SensorSpec& s, const char* name, double rate) {
    for (double t : spec.exposure_grid) {
      DrPoint p;
      p.exposure_s = t;
      p.sensor = name;
      p.frame_rate_fps = rate;
      try {
        const DrResult r = dynamic_range_details(s, t, rate, spec.snr_floor_db);
        p.n_frames = r.n_frames;
        p.phi_min = r.phi_min;
        p.phi_max = r.phi_max;
        p.dr_db = r.dr_db;
        p.valid = true;
      } catch (const std::exception&) {
        p.valid = false;
        p.phi_min = p.phi_max = p.dr_db = std::numeric_limits<double>::quiet_NaN();
      }
      table.points.push_back(std::move(p));
    }
  };
  for (double rate : spec.quanta_rates_fps) emit(quanta_spec, "quanta", rate);
  for (double rate : spec.conv_rates_fps) emit(conv_spec, "conv", rate);

  for (double qr : spec.quanta_rates_fps) {
    for (double cr : spec.conv_rates_fps) {
      DrCrossover x;
      x.quanta_rate_fps = qr;
      x.conv_rate_fps = cr;
      double prev_diff = std::numeric_limits<double>::quiet_NaN();
      double prev_t = 0;
      for (double t : spec.exposure_grid) {
        double dq, dc;
        try {
          dq = dynamic_range_db(quanta_spec, t, qr, spec.snr_floor_db);
          dc = dynamic_range_db(conv_spec, t, cr, spec.snr_floor_db);
        } catch (const std::exception&) {
          continue;
        }
        const double diff = dq - dc;
        if (diff >= 0) {
          x.found = true;
          x.crossover_exposure_s =
              std::isnan(prev_diff) || diff == prev_diff
                  ? t
                  : prev_t + (0.0 - prev_diff) * (t - prev_t) / (diff - prev_diff);
          break;
        }
        prev_diff = diff;
        prev_t = t;
      }
      table.crossovers.push_back(x);
    }
  }
  return table;
}

void write_snr_csv(std::ostream& os, const std::vector<SnrPoint>& rows) {
  os << "phi,v,exposure_s,n_quanta,n_conv,snr_quanta_db,snr_conv_db,diff_db,valid\n";
  for (const auto& r : rows) {
    std::string line;
    fmt(line, r.phi);
    line += ',';
    fmt(line, r.v);
    line += ',';
    fmt(line, r.exposure_s);
    line += ',';
    line += std::to_string(r.n_quanta);
    line += ',';
    line += std::to_string(r.n_conv);
    line += ',';
    fmt(line, r.snr_quanta_db);
    line += ',';
    fmt(line, r.snr_conv_db);
    line += ',';
    fmt(line, r.diff_db);
    line += ',';
    line += r.valid ? '1' : '0';
    line += '\n';
    os << line;
  }
}

void write_snr_csv(const std::string& path, const std::vector<SnrPoint>& rows) {
  auto os = open_csv(path);
  write_snr_csv(os, rows);
}

void write_dr_csv(std::ostream& os, const DrTable& table) {
  os << "exposure_s,sensor,frame_rate_fps,n_frames,phi_min,phi_max,dr_db,valid\n";
  for (const auto& p : table.points) {
    std::string line;
    fmt(line, p.exposure_s);
    line += ',';
    line += p.sensor;
    line += ',';
    fmt(line, p.frame_rate_fps);
    line += ',';
    line += std::to_string(p.n_frames);
    line += ',';
    fmt(line, p.phi_min);
    line += ',';
    fmt(line, p.phi_max);
    line += ',';
    fmt(line, p.dr_db);
    line += ',';
    line += p.valid ? '1' : '0';
    line += '\n';
    os << line;
  }
}

void write_dr_csv(const std::string& path, const DrTable& table) {
  auto os = open_csv(path);
  write_dr_csv(os, table);
}

}  // namespace qbp
