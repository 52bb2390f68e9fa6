#pragma once

#include <array>
#include <optional>
#include <vector>

#include "qbp/frame_sequence.hpp"
#include "qbp/image.hpp"
#include "qbp/sensor.hpp"

namespace qbp {

/// Parametric 2D scene motion. A scene feature at reference position q
/// (time 0) appears at q + offset(t) (translation) or at the affine image of
/// q at time t. Smooth seeded jitter (sum of three random-phase sinusoids)
/// can be layered on top. Deterministic given the seed.
struct MotionTrajectory {
  enum class Kind { GlobalTranslation, GlobalAffine, PerFrameList };
  Kind kind = Kind::GlobalTranslation;

  std::array<double, 2> velocity_px_per_s{0.0, 0.0};
  // Affine rates: d/dt of [a11 a12; a21 a22] relative to identity, plus
  // translation rates, applied about the image center.
  std::array<double, 4> affine_rate{0.0, 0.0, 0.0, 0.0};
  // Absolute per-frame offsets (PerFrameList); index = frame.
  std::vector<std::array<double, 2>> per_frame_offsets;
  double frame_period_s = 0.0;  // needed to index per_frame_offsets by time

  double jitter_amplitude_px = 0.0;
  double jitter_period_s = 0.01;
  uint64_t jitter_seed = 0;

  double boundary_fill = 0.0;  // flux assigned to never-seen regions

  /// Translation component at time t (jitter included; zero for pure affine).
  std::array<double, 2> offset_at(double t) const;
};

struct ExposurePlan {
  double total_exposure_s = 0.0;  // T
  int n_frames = 0;               // n_c (conventional) or n_q (quanta)
  // Inputs echoed for reporting:
  double target_count = 0.0;          // c_t
  double max_total_motion_px = 0.0;   // m_max
  double max_per_frame_motion_px = 0.0;  // m_f
  double apparent_speed_px_per_s = 0.0;  // v
  double mean_flux = 0.0;                // phi-bar
};

struct DcrMap {
  Image<double> dcr_cps;       // per-pixel dark count rate
  Image<uint8_t> hot_mask;     // 1 exactly where DCR exceeds the threshold
};

/// Resamples the flux image under the trajectory's warp at time t
/// (bilinear; out-of-frame regions take trajectory.boundary_fill).
FluxImage warp_flux(const FluxImage& flux, const MotionTrajectory& trajectory, double t);

/// Per-frame independent Bernoulli sampling of a SPAD binary sequence.
/// Flux is warped to each frame's midpoint. Per-pixel DCR from dcr_map when
/// given, else spec.dark_rate everywhere. Bit-identical for any thread count.
FrameSequence sample_spad_sequence(const FluxImage& flux, const SensorSpec& spec,
                                   const MotionTrajectory& trajectory, int n_frames,
                                   const std::optional<DcrMap>& dcr_map, uint64_t seed);

/// Jot sequence: per jot, Poisson(phi*tau*eta) + Poisson(tau*dark) photons and
/// dark electrons plus Gaussian read noise, rounded and clamped to the ADC
/// range; then a K x K box filter downsamples to (W/K) x (H/K). Stored frame
/// values are box SUMS; jot_normalized() maps them to the [0,1] scale used by
/// alignment. K must divide both dimensions.
FrameSequence sample_jot_sequence(const FluxImage& flux, const SensorSpec& spec,
                                  const MotionTrajectory& trajectory, int n_frames,
                                  int oversample_factor, uint64_t seed);

/// Normalized [0,1] view of one jot frame: stored sum / (K^2 * (2^bits - 1)).
Image<double> jot_normalized(const FrameSequence& seq, int frame, int oversample_factor,
                             int jot_bit_depth);

/// Conventional burst per the plan: n_frames exposures of T/n_frames each;
/// I = Poisson(phi*tau*eta) + Poisson(tau*dark) + N(0, read_noise), rounded
/// and clamped above at min(2^bits, full_well) - 1. Deep (>8-bit) frames use
/// the black-level-subtracted convention: read-noise excursions below zero
/// are stored as negative values so downstream flux estimates stay unbiased.
FrameSequence emulate_conventional_burst(const FluxImage& flux, const SensorSpec& spec,
                                         const MotionTrajectory& trajectory,
                                         const ExposurePlan& plan, uint64_t seed);

/// Auto-exposure: T = min(c_t/phi_bar, m_max/v) (first term alone when v=0);
/// conventional n = max(1, ceil(v*T/m_f)); quanta n = floor(T*frame_rate).
/// Errors when phi_bar = 0 and v = 0 (unbounded exposure) or when T is
/// shorter than one quanta frame.
ExposurePlan plan_exposure(double phi_mean, double v, const SensorSpec& spec, double c_t,
                           double m_max, double m_f);

/// Per-pixel dark count rates from a dark (zero-flux) sequence:
/// DCR = -ln(1 - S/n)/tau. Pixels firing in every frame are clipped to
/// S = n-1 for the rate value and flagged hot unconditionally.
DcrMap build_dcr_map(const FrameSequence& dark_sequence, double hot_threshold_cps);

}  // namespace qbp
