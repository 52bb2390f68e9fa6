// SNR surfaces, dynamic-range curves, and their CSV emission.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "qbp/analysis.hpp"
#include "qbp/model.hpp"
#include "qbp/sensor.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

qbp::SensorSpec spad_at(double eta, double dark, double fps) {
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Spad;
  spec.bit_depth = 1;
  spec.pde = {eta, eta, eta};
  spec.read_noise_e = 0.0;
  spec.dark_rate = dark;
  spec.frame_rate_fps = fps;
  return spec;
}

}  // namespace

TEST_CASE("snr_db is 20*log10(phi/rmse)") {
  CHECK(qbp::snr_db(100.0, 100.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(qbp::snr_db(100.0, 10.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(qbp::snr_db(100.0, 1000.0) == doctest::Approx(-20.0).epsilon(1e-12));
  // Composition with the binary-sum error bound at lambda = ln 2, n = 1e4:
  // rmse = 4347.8260869565217 (frozen elsewhere).
  const double phi = std::log(2.0) / 2.3e-6;
  const double rmse = qbp::fisher_rmse_quanta(phi, 10000, 1e-5, 0.23, 0.0);
  CHECK(qbp::snr_db(phi, rmse) ==
        doctest::Approx(20.0 * std::log10(phi / 4347.8260869565217)).epsilon(1e-12));

  CHECK_THROWS_AS(qbp::snr_db(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(qbp::snr_db(1.0, 0.0), std::domain_error);
}

TEST_CASE("binary-sensor saturation flux follows the n-1 of n reading") {
  // n = 1000 frames at tau = 1e-5, eta = 0.23, no dark counts:
  // phi_max = ln(1000) / (1e-5 * 0.23) frozen below.
  const auto spec = spad_at(0.23, 0.0, 1e5);
  const qbp::DrResult r = qbp::dynamic_range_details(spec, 0.01, 1e5);
  CHECK(r.n_frames == 1000);
  CHECK(r.phi_max == doctest::Approx(3003371.8604270161).epsilon(1e-12));
  CHECK(r.dr_db == doctest::Approx(20.0 * std::log10(r.phi_max / r.phi_min)).epsilon(1e-12));

  // Fewer than 2 frames: saturation reading undefined.
  CHECK_THROWS_AS(qbp::dynamic_range_details(spec, 1e-5, 1e5), std::domain_error);
}

TEST_CASE("binary-sensor noise floor flux matches the frozen bisection result") {
  // eta = 0.23, dark 7.5 cps, n = 1000 frames of 1e-5 s, 0 dB floor.
  const auto spec = spad_at(0.23, 7.5, 1e5);
  const qbp::DrResult r = qbp::dynamic_range_details(spec, 0.01, 1e5);
  CHECK(r.phi_min == doctest::Approx(465.50575245545933).epsilon(1e-5));
  // The floor flux satisfies snr(phi_min) >= floor within tolerance.
  const double rmse = qbp::fisher_rmse_quanta(r.phi_min * (1 + 1e-5), 1000, 1e-5, 0.23, 7.5);
  CHECK(qbp::snr_db(r.phi_min * (1 + 1e-5), rmse) >= 0.0);
}

TEST_CASE("conventional saturation and floor fluxes match their closed forms") {
  qbp::SensorSpec conv;
  conv.kind = qbp::SensorKind::Conventional;
  conv.bit_depth = 10;
  conv.pde = {0.64, 0.64, 0.64};
  conv.read_noise_e = 2.4;
  conv.dark_rate = 1.0;
  conv.frame_rate_fps = 1000.0;
  conv.full_well_e = 10000.0;

  // T = 1 s at 1000 fps -> n = 1000, tau = 1e-3.
  // phi_max = ((FW - 1) - dark*tau) / (tau*eta) = 15623435.9375 exactly.
  const qbp::DrResult r = qbp::dynamic_range_details(conv, 1.0, 1000.0);
  CHECK(r.n_frames == 1000);
  CHECK(r.phi_max == doctest::Approx(15623435.9375).epsilon(1e-12));
  CHECK(r.phi_min == doctest::Approx(119.37952889903167).epsilon(1e-5));
  CHECK(r.dr_db == doctest::Approx(20.0 * std::log10(r.phi_max / r.phi_min)).epsilon(1e-9));
}

TEST_CASE("quanta dynamic range grows with exposure") {
  const auto spec = spad_at(0.23, 7.5, 97700.0);
  double prev = -1.0;
  for (double t : {0.01, 0.05, 0.2, 1.0}) {
    const double dr = qbp::dynamic_range_db(spec, t, 97700.0);
    CHECK(dr > prev);
    prev = dr;
  }
}

TEST_CASE("snr_surface evaluates the closed forms at each feasible grid point") {
  qbp::SnrGridSpec grid;
  grid.quanta_spec = qbp::sensor_preset("spad-swiss2");
  grid.conv_spec = qbp::sensor_preset("conv-machinevision");
  grid.flux_grid = {10.0};
  grid.speed_grid = {1000.0};

  const auto rows = qbp::snr_surface(grid);
  REQUIRE(rows.size() == 1);
  const qbp::SnrPoint& p = rows[0];
  CHECK(p.valid);
  CHECK(p.phi == 10.0);
  CHECK(p.v == 1000.0);
  // Auto exposure: T = min(1000/10, 60/1000) = 0.06 s.
  CHECK(p.exposure_s == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(p.n_conv == 60);
  CHECK(p.n_quanta == static_cast<int>(std::floor(0.06 * 97700.0)));

  // Recompose both SNRs from the model formulas.
  const double eta_q = grid.quanta_spec.eta();
  const double tau_q = 1.0 / 97700.0;
  const double rmse_q =
      qbp::fisher_rmse_quanta(10.0, p.n_quanta, tau_q, eta_q, grid.quanta_spec.dark_rate);
  CHECK(p.snr_quanta_db == doctest::Approx(qbp::snr_db(10.0, rmse_q)).epsilon(1e-12));

  const double tau_c = 0.06 / 60.0;
  const double rmse_c = qbp::rmse_conventional(
      10.0, p.n_conv, tau_c, grid.conv_spec.eta(), grid.conv_spec.dark_rate,
      grid.conv_spec.read_noise_e);
  CHECK(p.snr_conv_db == doctest::Approx(qbp::snr_db(10.0, rmse_c)).epsilon(1e-12));
  CHECK(p.diff_db == doctest::Approx(p.snr_quanta_db - p.snr_conv_db).epsilon(1e-12));
}

TEST_CASE("snr_surface is flux-major ordered and marks infeasible points invalid") {
  qbp::SnrGridSpec grid;
  grid.quanta_spec = qbp::sensor_preset("spad-swiss2");
  grid.conv_spec = qbp::sensor_preset("conv-machinevision");
  grid.flux_grid = {10.0, 1e12};  // 1e12: T = 1e-9 s, shorter than a quanta frame
  grid.speed_grid = {0.0, 100.0};

  const auto rows = qbp::snr_surface(grid);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].phi == 10.0);
  CHECK(rows[0].v == 0.0);
  CHECK(rows[1].phi == 10.0);
  CHECK(rows[1].v == 100.0);
  CHECK(rows[2].phi == 1e12);
  CHECK(rows[2].v == 0.0);
  CHECK(rows[3].phi == 1e12);
  CHECK(rows[3].v == 100.0);

  CHECK(rows[0].valid);
  CHECK_FALSE(rows[2].valid);  // quanta plan infeasible
  CHECK(std::isnan(rows[2].snr_quanta_db));
}

TEST_CASE("dr_curves tabulates both sensors and brackets the crossover") {
  const auto quanta = qbp::sensor_preset("spad-swiss2");
  const auto conv = qbp::sensor_preset("conv-machinevision");
  qbp::DrSpec spec;
  spec.exposure_grid = {0.01, 0.02, 0.04, 0.08, 0.16};

  const qbp::DrTable table = qbp::dr_curves(quanta, conv, spec);
  REQUIRE(table.points.size() == 10);  // quanta rows first, then conventional
  for (size_t i = 0; i < 5; ++i) {
    CHECK(table.points[i].sensor == "quanta");
    CHECK(table.points[i].frame_rate_fps == 97700.0);
    CHECK(table.points[i].exposure_s == spec.exposure_grid[i]);
  }
  for (size_t i = 5; i < 10; ++i) {
    CHECK(table.points[i].sensor == "conv");
    CHECK(table.points[i].frame_rate_fps == 1000.0);
  }

  REQUIRE(table.crossovers.size() == 1);
  const auto& c = table.crossovers[0];
  CHECK(c.quanta_rate_fps == 97700.0);
  CHECK(c.conv_rate_fps == 1000.0);
  if (c.found) {
    CHECK(c.crossover_exposure_s >= spec.exposure_grid.front());
    CHECK(c.crossover_exposure_s <= spec.exposure_grid.back());
    // The difference changes sign across the crossover: quanta DR is below
    // conventional at the grid point before, at or above after.
    double before = -1e9, after = 1e9;
    for (size_t i = 0; i < 5; ++i) {
      const double d = table.points[i].dr_db - table.points[i + 5].dr_db;
      if (spec.exposure_grid[i] <= c.crossover_exposure_s) before = d;
      if (spec.exposure_grid[4 - i] >= c.crossover_exposure_s)
        after = table.points[4 - i].dr_db - table.points[9 - i].dr_db;
    }
    CHECK(before <= 1e-9);
    CHECK(after >= -1e-9);
  }
}

TEST_CASE("snr CSV has the documented header, order, and formatting") {
  qbp::SnrGridSpec grid;
  grid.quanta_spec = qbp::sensor_preset("spad-swiss2");
  grid.conv_spec = qbp::sensor_preset("conv-machinevision");
  grid.flux_grid = {10.0, 1e12};
  grid.speed_grid = {0.0};
  const auto rows = qbp::snr_surface(grid);

  std::ostringstream ss;
  qbp::write_snr_csv(ss, rows);
  const std::string text = ss.str();
  CHECK(text.rfind("phi,v,exposure_s,n_quanta,n_conv,snr_quanta_db,snr_conv_db,diff_db,valid\n",
                   0) == 0);
  // One header plus one line per row.
  int newlines = 0;
  for (char ch : text)
    if (ch == '\n') ++newlines;
  CHECK(newlines == 3);
  // The infeasible row carries "nan" fields and valid = 0.
  const auto last_start = text.rfind("1e+12,");
  REQUIRE(last_start != std::string::npos);
  const std::string last = text.substr(last_start);
  CHECK(last.find("nan") != std::string::npos);
  CHECK(last.find(",0\n") != std::string::npos);

  SUBCASE("writing twice produces identical bytes; the file overload matches") {
    std::ostringstream again;
    qbp::write_snr_csv(again, rows);
    CHECK(again.str() == text);
    const std::string path = "snr_csv_test.tmp";
    qbp::write_snr_csv(path, rows);
    CHECK(slurp(path) == text);
    std::remove(path.c_str());
  }
}

TEST_CASE("dr CSV has the documented header and one row per point") {
  const auto quanta = qbp::sensor_preset("spad-swiss2");
  const auto conv = qbp::sensor_preset("conv-machinevision");
  qbp::DrSpec spec;
  spec.exposure_grid = {0.01, 0.1};
  const qbp::DrTable table = qbp::dr_curves(quanta, conv, spec);

  std::ostringstream ss;
  qbp::write_dr_csv(ss, table);
  const std::string text = ss.str();
  CHECK(text.rfind("exposure_s,sensor,frame_rate_fps,n_frames,phi_min,phi_max,dr_db,valid\n",
                   0) == 0);
  int newlines = 0;
  for (char ch : text)
    if (ch == '\n') ++newlines;
  CHECK(newlines == 1 + static_cast<int>(table.points.size()));
  CHECK(text.find("quanta") != std::string::npos);
  CHECK(text.find("conv") != std::string::npos);

  const std::string path = "dr_csv_test.tmp";
  qbp::write_dr_csv(path, table);
  CHECK(slurp(path) == text);
  std::remove(path.c_str());
}
