// Scene motion, sensor sampling, exposure planning, and dark-rate calibration.
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "doctest.h"
#include "qbp/frame_sequence.hpp"
#include "qbp/image.hpp"
#include "qbp/model.hpp"
#include "qbp/parallel.hpp"
#include "qbp/rng.hpp"
#include "qbp/sensor.hpp"
#include "qbp/simulate.hpp"

namespace {

qbp::SensorSpec spad_spec(double eta, double dark, double fps) {
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Spad;
  spec.bit_depth = 1;
  spec.pde = {eta, eta, eta};
  spec.read_noise_e = 0.0;
  spec.dark_rate = dark;
  spec.frame_rate_fps = fps;
  return spec;
}

qbp::FluxImage constant_flux(int w, int h, double value) {
  qbp::FluxImage flux(w, h);
  for (double& v : flux.data) v = value;
  return flux;
}

}  // namespace

TEST_CASE("warp_flux shifts scene features by the trajectory offset") {
  // A feature at reference position q must appear at q + offset(t).
  qbp::FluxImage flux(9, 9);
  flux.at(3, 4) = 100.0;

  qbp::MotionTrajectory traj;
  traj.velocity_px_per_s = {2.0, -1.0};

  SUBCASE("integer offset is exact") {
    // t = 1 -> offset (2, -1): feature moves from (3,4) to (5,3).
    const qbp::FluxImage warped = qbp::warp_flux(flux, traj, 1.0);
    CHECK(warped.at(5, 3) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(warped.at(3, 4) == doctest::Approx(0.0).epsilon(1e-12));
    double total = 0.0;
    for (double v : warped.data) total += v;
    CHECK(total == doctest::Approx(100.0).epsilon(1e-12));
  }

  SUBCASE("fractional offset splits bilinearly") {
    // t = 0.25 -> offset (0.5, -0.25): mass splits across the 4 neighbors of
    // (3.5, 3.75) with bilinear weights.
    const qbp::FluxImage warped = qbp::warp_flux(flux, traj, 0.25);
    CHECK(warped.at(3, 4) == doctest::Approx(100.0 * 0.5 * 0.75).epsilon(1e-12));
    CHECK(warped.at(4, 4) == doctest::Approx(100.0 * 0.5 * 0.75).epsilon(1e-12));
    CHECK(warped.at(3, 3) == doctest::Approx(100.0 * 0.5 * 0.25).epsilon(1e-12));
    CHECK(warped.at(4, 3) == doctest::Approx(100.0 * 0.5 * 0.25).epsilon(1e-12));
  }

  SUBCASE("regions sliding out of frame take the boundary fill value") {
    traj.boundary_fill = 7.5;
    // Large positive x offset: the left edge has never-seen content.
    const qbp::FluxImage warped = qbp::warp_flux(flux, traj, 2.0);  // offset (4, -2)
    CHECK(warped.at(0, 0) == doctest::Approx(7.5).epsilon(1e-12));
    CHECK(warped.at(7, 2) == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("MotionTrajectory::offset_at is linear in time without jitter") {
  qbp::MotionTrajectory traj;
  traj.velocity_px_per_s = {2.0, -1.0};
  const auto o = traj.offset_at(3.0);
  CHECK(o[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(o[1] == doctest::Approx(-3.0).epsilon(1e-15));
  const auto z = traj.offset_at(0.0);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("jitter is deterministic per seed and bounded by its amplitude") {
  qbp::MotionTrajectory a;
  a.jitter_amplitude_px = 2.0;
  a.jitter_period_s = 0.05;
  a.jitter_seed = 42;
  qbp::MotionTrajectory b = a;
  qbp::MotionTrajectory c = a;
  c.jitter_seed = 43;

  bool any_nonzero = false;
  bool differs_from_other_seed = false;
  for (int i = 0; i < 50; ++i) {
    const double t = 0.003 * i;
    const auto oa = a.offset_at(t);
    const auto ob = b.offset_at(t);
    const auto oc = c.offset_at(t);
    CHECK(oa[0] == ob[0]);
    CHECK(oa[1] == ob[1]);
    if (oa[0] != 0.0 || oa[1] != 0.0) any_nonzero = true;
    if (oa[0] != oc[0] || oa[1] != oc[1]) differs_from_other_seed = true;
    // Sum of three unit-amplitude sinusoids scaled by amplitude.
    CHECK(std::abs(oa[0]) <= 3.0 * a.jitter_amplitude_px + 1e-9);
    CHECK(std::abs(oa[1]) <= 3.0 * a.jitter_amplitude_px + 1e-9);
  }
  CHECK(any_nonzero);
  CHECK(differs_from_other_seed);
}

TEST_CASE("binary sampling of a dark, zero-flux scene yields all zeros") {
  const qbp::FluxImage flux = constant_flux(8, 8, 0.0);
  const auto spec = spad_spec(0.23, 0.0, 1e5);
  qbp::MotionTrajectory traj;
  const qbp::FrameSequence seq =
      qbp::sample_spad_sequence(flux, spec, traj, 10, std::nullopt, 7);
  REQUIRE(seq.n_frames() == 10);
  for (int f = 0; f < seq.n_frames(); ++f)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) CHECK(seq.get(f, x, y) == 0);
}

TEST_CASE("binary detection rate matches the analytic probability") {
  // phi = 1e4, tau = 1e-5, eta = 0.23, dark = 7.5 -> P{B=1} frozen below.
  const double p = 0.022810808164523899;
  const auto spec = spad_spec(0.23, 7.5, 1e5);
  const qbp::FluxImage flux = constant_flux(64, 64, 1e4);
  qbp::MotionTrajectory traj;
  const int n_frames = 200;
  const qbp::FrameSequence seq =
      qbp::sample_spad_sequence(flux, spec, traj, n_frames, std::nullopt, 12345);

  int64_t ones = 0;
  for (int f = 0; f < n_frames; ++f)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) ones += seq.get(f, x, y);
  const double trials = 64.0 * 64.0 * n_frames;
  const double p_hat = static_cast<double>(ones) / trials;
  const double sigma = std::sqrt(p * (1.0 - p) / trials);
  CHECK(std::abs(p_hat - p) <= 3.0 * sigma);
}

TEST_CASE("binary sampling is identical across thread counts") {
  const auto spec = spad_spec(0.23, 7.5, 1e5);
  const qbp::FluxImage flux = constant_flux(32, 16, 5e4);
  qbp::MotionTrajectory traj;
  traj.velocity_px_per_s = {120.0, -60.0};

  qbp::set_thread_count(1);
  const qbp::FrameSequence seq1 =
      qbp::sample_spad_sequence(flux, spec, traj, 25, std::nullopt, 99);
  qbp::set_thread_count(4);
  const qbp::FrameSequence seq4 =
      qbp::sample_spad_sequence(flux, spec, traj, 25, std::nullopt, 99);
  qbp::set_thread_count(0);

  REQUIRE(seq1.n_frames() == seq4.n_frames());
  for (int f = 0; f < seq1.n_frames(); ++f)
    CHECK(seq1.packed_frame(f) == seq4.packed_frame(f));
}

TEST_CASE("per-pixel dark-rate map overrides the scalar dark rate") {
  // Zero flux; one pixel with a huge DCR fires essentially every frame while
  // the rest (DCR 0) never fire.
  const qbp::FluxImage flux = constant_flux(4, 4, 0.0);
  auto spec = spad_spec(0.5, 0.0, 1e5);
  qbp::MotionTrajectory traj;
  qbp::DcrMap map{qbp::Image<double>(4, 4), qbp::Image<uint8_t>(4, 4)};
  map.dcr_cps.at(2, 1) = 1e7;  // lambda = 100 per frame -> fires always
  const int n_frames = 64;
  const qbp::FrameSequence seq =
      qbp::sample_spad_sequence(flux, spec, traj, n_frames, map, 5);
  for (int f = 0; f < n_frames; ++f) {
    CHECK(seq.get(f, 2, 1) == 1);
    CHECK(seq.get(f, 0, 0) == 0);
    CHECK(seq.get(f, 3, 3) == 0);
  }
}

TEST_CASE("multi-bit jot flip rate at zero flux matches the read-noise tail") {
  // Zero flux, zero dark, read noise 0.24 e-, 1-bit ADC, K = 1: a stored 1
  // requires N(0, 0.24) >= 0.5. P = 0.018610425189886349 (frozen).
  const double p_flip = 0.018610425189886349;
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Jot;
  spec.bit_depth = 1;
  spec.pde = {0.64, 0.71, 0.62};
  spec.read_noise_e = 0.24;
  spec.dark_rate = 0.0;
  spec.frame_rate_fps = 1000.0;
  const qbp::FluxImage flux = constant_flux(64, 64, 0.0);
  qbp::MotionTrajectory traj;
  const int n_frames = 200;
  const qbp::FrameSequence seq =
      qbp::sample_jot_sequence(flux, spec, traj, n_frames, 1, 31);

  int64_t ones = 0;
  for (int f = 0; f < n_frames; ++f)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) ones += seq.get(f, x, y);
  const double trials = 64.0 * 64.0 * n_frames;
  const double p_hat = static_cast<double>(ones) / trials;
  const double sigma = std::sqrt(p_flip * (1.0 - p_flip) / trials);
  CHECK(std::abs(p_hat - p_flip) <= 3.0 * sigma);
}

TEST_CASE("jot box filter stores sums and jot_normalized rescales to [0,1]") {
  // Saturating flux: every jot reads full scale, so each stored value is the
  // K*K box sum of (2^bits - 1) and the normalized view is exactly 1.
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Jot;
  spec.bit_depth = 2;             // ADC max 3
  spec.pde = {0.71, 0.71, 0.71};
  spec.read_noise_e = 0.0;
  spec.dark_rate = 0.0;
  spec.frame_rate_fps = 1000.0;
  const int k = 2;
  const qbp::FluxImage flux = constant_flux(8, 8, 1e9);  // lambda huge -> clamp
  qbp::MotionTrajectory traj;
  const qbp::FrameSequence seq = qbp::sample_jot_sequence(flux, spec, traj, 3, k, 11);
  REQUIRE(seq.width() == 4);
  REQUIRE(seq.height() == 4);
  for (int f = 0; f < 3; ++f) {
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(seq.get(f, x, y) == k * k * 3);
    const qbp::Image<double> norm = qbp::jot_normalized(seq, f, k, 2);
    for (double v : norm.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("jot oversample factor must divide both image dimensions") {
  const qbp::FluxImage flux = constant_flux(9, 8, 1.0);
  auto spec = spad_spec(0.5, 0.0, 1000.0);
  spec.kind = qbp::SensorKind::Jot;
  qbp::MotionTrajectory traj;
  CHECK_THROWS_AS(qbp::sample_jot_sequence(flux, spec, traj, 1, 2, 0),
                  std::invalid_argument);
}

TEST_CASE("conventional ADC clamps exactly at the top code") {
  // Noise-free, flux so bright that phi*tau*eta far exceeds the clamp:
  // every sample must equal min(2^bits, full_well) - 1 exactly.
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Conventional;
  spec.bit_depth = 14;
  spec.pde = {0.64, 0.64, 0.64};
  spec.read_noise_e = 0.0;
  spec.dark_rate = 0.0;
  spec.frame_rate_fps = 1000.0;
  spec.full_well_e = 1000.0;  // clamp at 999
  const double tau = 1e-3;
  const double phi = 2000.0 / (tau * 0.64);  // ~2 full wells per frame
  const qbp::FluxImage flux = constant_flux(6, 5, phi);
  qbp::MotionTrajectory traj;
  qbp::ExposurePlan plan;
  plan.total_exposure_s = 4 * tau;
  plan.n_frames = 4;
  const qbp::FrameSequence seq =
      qbp::emulate_conventional_burst(flux, spec, traj, plan, 3);
  for (int f = 0; f < 4; ++f)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) CHECK(seq.get(f, x, y) == 999);
}

TEST_CASE("conventional samples average to the expected electron count") {
  // phi*tau*eta = 100 electrons per frame, dark and read noise zero.
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Conventional;
  spec.bit_depth = 12;
  spec.pde = {0.5, 0.5, 0.5};
  spec.read_noise_e = 0.0;
  spec.dark_rate = 0.0;
  spec.frame_rate_fps = 1000.0;
  spec.full_well_e = 10000.0;
  const double tau = 1e-3;
  const qbp::FluxImage flux = constant_flux(32, 32, 100.0 / (tau * 0.5));
  qbp::MotionTrajectory traj;
  qbp::ExposurePlan plan;
  plan.total_exposure_s = 10 * tau;
  plan.n_frames = 10;
  const qbp::FrameSequence seq =
      qbp::emulate_conventional_burst(flux, spec, traj, plan, 17);
  double sum = 0.0;
  for (int f = 0; f < 10; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) sum += seq.get(f, x, y);
  const double n_samples = 32.0 * 32.0 * 10.0;
  const double mean = sum / n_samples;
  // Var = 100 (shot); 3 sigma of the mean ~ 0.3.
  CHECK(std::abs(mean - 100.0) <= 3.0 * std::sqrt(100.0 / n_samples));
}

TEST_CASE("deep conventional frames keep negative read-noise excursions") {
  // Zero flux with read noise 2.4 e-: roughly half the samples must come out
  // negative, and the mean must sit near zero (no floor bias).
  qbp::SensorSpec spec;
  spec.kind = qbp::SensorKind::Conventional;
  spec.bit_depth = 10;
  spec.pde = {0.64, 0.64, 0.64};
  spec.read_noise_e = 2.4;
  spec.dark_rate = 0.0;
  spec.frame_rate_fps = 1000.0;
  spec.full_well_e = 10000.0;
  const qbp::FluxImage flux = constant_flux(32, 32, 0.0);
  qbp::MotionTrajectory traj;
  qbp::ExposurePlan plan;
  plan.total_exposure_s = 10e-3;
  plan.n_frames = 10;
  const qbp::FrameSequence seq =
      qbp::emulate_conventional_burst(flux, spec, traj, plan, 23);
  int64_t negatives = 0;
  double sum = 0.0;
  for (int f = 0; f < 10; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const int v = seq.get(f, x, y);
        if (v < 0) ++negatives;
        sum += v;
      }
  const double n_samples = 32.0 * 32.0 * 10.0;
  CHECK(negatives > 0);
  // Mean of N(0, 2.4) quantized: 3 sigma of the sample mean.
  CHECK(std::abs(sum / n_samples) <= 3.0 * 2.4 / std::sqrt(n_samples));
}

TEST_CASE("exposure planning follows the brighter-of-two-limits rule") {
  auto conv = qbp::sensor_preset("conv-machinevision");
  auto quanta = qbp::sensor_preset("spad-swiss2");

  SUBCASE("static scene: exposure set by the target count alone") {
    // T = c_t / phi_bar = 1000 / 1000 = 1 s; v = 0 -> single conventional frame.
    const auto plan = qbp::plan_exposure(1000.0, 0.0, conv, 1000.0, 60.0, 1.0);
    CHECK(plan.total_exposure_s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plan.n_frames == 1);
  }

  SUBCASE("fast motion: exposure capped by total blur budget") {
    // c_t/phi = 1.0 but m_max/v = 60/1000 = 0.06 -> T = 0.06;
    // n_c = ceil(v*T/m_f) = ceil(60) = 60.
    const auto plan = qbp::plan_exposure(1000.0, 1000.0, conv, 1000.0, 60.0, 1.0);
    CHECK(plan.total_exposure_s == doctest::Approx(0.06).epsilon(1e-12));
    CHECK(plan.n_frames == 60);
  }

  SUBCASE("quanta frame count is exposure times frame rate, floored") {
    const auto plan = qbp::plan_exposure(1000.0, 1000.0, quanta, 1000.0, 60.0, 1.0);
    CHECK(plan.total_exposure_s == doctest::Approx(0.06).epsilon(1e-12));
    CHECK(plan.n_frames == static_cast<int>(std::floor(0.06 * 97700.0)));
  }

  SUBCASE("zero flux and zero motion is an unbounded exposure") {
    CHECK_THROWS_AS(qbp::plan_exposure(0.0, 0.0, conv, 1000.0, 60.0, 1.0),
                    std::invalid_argument);
  }

  SUBCASE("exposure shorter than one quanta frame is rejected") {
    // phi huge -> T = 1000/1e9 = 1e-6 s < one 97700 fps frame.
    CHECK_THROWS_AS(qbp::plan_exposure(1e9, 0.0, quanta, 1000.0, 60.0, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("dark-rate calibration inverts the firing probability") {
  // Hand-built 3x3 binary sequence, 1000 frames at tau = 1e-5 s.
  qbp::FrameSequence dark(3, 3, 1000, 1);
  dark.frame_period_s = 1e-5;
  dark.exposure_s = 1e-5;
  auto spec = spad_spec(1.0, 0.0, 1e5);
  dark.spec = spec;
  // Pixel (1,1) fires in 500 frames; pixel (2,0) fires in all 1000;
  // everything else never fires.
  for (int f = 0; f < 1000; ++f) {
    if (f < 500) dark.set(f, 1, 1, 1);
    dark.set(f, 2, 0, 1);
  }
  const qbp::DcrMap map = qbp::build_dcr_map(dark, 1e5);

  // DCR(S/n = 0.5, tau = 1e-5) = ln(2)/1e-5 (frozen).
  CHECK(map.dcr_cps.at(1, 1) == doctest::Approx(69314.718055994531).epsilon(1e-12));
  CHECK(map.dcr_cps.at(0, 0) == 0.0);
  CHECK(map.hot_mask.at(1, 1) == 0);  // 69.3 kcps below the 100 kcps threshold
  CHECK(map.hot_mask.at(0, 0) == 0);

  // Always-firing pixel: rate computed from S = n-1, flagged hot regardless.
  const double clipped = -std::log(1.0 - 999.0 / 1000.0) / 1e-5;
  CHECK(map.dcr_cps.at(2, 0) == doctest::Approx(clipped).epsilon(1e-12));
  CHECK(map.hot_mask.at(2, 0) == 1);

  SUBCASE("threshold splits the mask") {
    const qbp::DcrMap strict = qbp::build_dcr_map(dark, 5e4);
    CHECK(strict.hot_mask.at(1, 1) == 1);  // 69.3 kcps exceeds 50 kcps
    CHECK(strict.hot_mask.at(0, 0) == 0);
  }
}
