#include "qbp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qbp/model.hpp"
#include "qbp/parallel.hpp"
#include "qbp/rng.hpp"

namespace qbp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Sinusoid {
  double amp, freq, phase;
};

// Three random-phase sinusoids per axis: smooth, zero-mean, deterministic.
std::array<std::array<Sinusoid, 3>, 2> jitter_components(const MotionTrajectory& tr) {
  std::array<std::array<Sinusoid, 3>, 2> out{};
  RngStream rng(tr.jitter_seed, 0x6a69747465ULL, 0);
  for (auto& axis : out) {
    for (auto& s : axis) {
      s.amp = tr.jitter_amplitude_px * (0.5 + 0.5 * rng.uniform());
      s.freq = (0.5 + rng.uniform()) / tr.jitter_period_s;
      s.phase = kTwoPi * rng.uniform();
    }
  }
  return out;
}

bool is_identity(const MotionTrajectory& tr, double t) {
  if (tr.jitter_amplitude_px != 0.0) return false;
  switch (tr.kind) {
    case MotionTrajectory::Kind::GlobalTranslation:
      return tr.velocity_px_per_s[0] * t == 0.0 && tr.velocity_px_per_s[1] * t == 0.0;
    case MotionTrajectory::Kind::GlobalAffine:
      return t == 0.0 || (tr.affine_rate == std::array<double, 4>{0, 0, 0, 0} &&
                          tr.velocity_px_per_s == std::array<double, 2>{0, 0});
    case MotionTrajectory::Kind::PerFrameList:
      return false;
  }
  return false;
}

}  // namespace

std::array<double, 2> MotionTrajectory::offset_at(double t) const {
  std::array<double, 2> d{0.0, 0.0};
  if (kind == Kind::PerFrameList) {
    if (per_frame_offsets.empty()) throw std::invalid_argument("per-frame trajectory has no entries");
    if (!(frame_period_s > 0.0))
      throw std::invalid_argument("per-frame trajectory needs frame_period_s");
    auto idx = static_cast<size_t>(std::max(0.0, std::floor(t / frame_period_s)));
    if (idx >= per_frame_offsets.size()) idx = per_frame_offsets.size() - 1;
    d = per_frame_offsets[idx];
  } else {
    d[0] = velocity_px_per_s[0] * t;
    d[1] = velocity_px_per_s[1] * t;
  }
  if (jitter_amplitude_px > 0.0) {
    const auto sines = jitter_components(*this);
    for (int a = 0; a < 2; ++a) {
      for (const auto& s : sines[static_cast<size_t>(a)]) {
        d[static_cast<size_t>(a)] += s.amp * std::sin(kTwoPi * s.freq * t + s.phase);
      }
    }
  }
  return d;
}

FluxImage warp_flux(const FluxImage& flux, const MotionTrajectory& trajectory, double t) {
  if (is_identity(trajectory, t)) return flux;
  const int w = flux.width, h = flux.height;
  FluxImage out(w, h);
  const auto d = trajectory.offset_at(t);

  // Inverse map: where does output pixel x come from in the time-0 image?
  double a11 = 1, a12 = 0, a21 = 0, a22 = 1;
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  if (trajectory.kind == MotionTrajectory::Kind::GlobalAffine) {
    a11 = 1.0 + trajectory.affine_rate[0] * t;
    a12 = trajectory.affine_rate[1] * t;
    a21 = trajectory.affine_rate[2] * t;
    a22 = 1.0 + trajectory.affine_rate[3] * t;
  }
  const double det = a11 * a22 - a12 * a21;
  if (std::abs(det) < 1e-12) throw std::invalid_argument("degenerate affine warp");
  const double i11 = a22 / det, i12 = -a12 / det, i21 = -a21 / det, i22 = a11 / det;

  parallel_for(0, h, [&](int64_t y) {
    for (int x = 0; x < w; ++x) {
      const double rx = x - d[0] - cx;
      const double ry = static_cast<double>(y) - d[1] - cy;
      const double sx = i11 * rx + i12 * ry + cx;
      const double sy = i21 * rx + i22 * ry + cy;
      double v;
      if (sx < -0.5 || sy < -0.5 || sx > w - 0.5 || sy > h - 0.5) {
        v = trajectory.boundary_fill;
      } else {
        v = bilinear_at(flux, sx, sy);
      }
      out.at(x, static_cast<int>(y)) = v;
    }
  });
  return out;
}

FrameSequence sample_spad_sequence(const FluxImage& flux, const SensorSpec& spec,
                                   const MotionTrajectory& trajectory, int n_frames,
                                   const std::optional<DcrMap>& dcr_map, uint64_t seed) {
  spec.validate();
  if (spec.kind != SensorKind::Spad) throw std::invalid_argument("sample_spad_sequence needs a SPAD spec");
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  if (dcr_map && !dcr_map->dcr_cps.same_shape(flux))
    throw std::invalid_argument("dcr map shape mismatch");

  FrameSequence seq(flux.width, flux.height, n_frames, 1);
  seq.frame_period_s = spec.exposure_s();
  seq.exposure_s = spec.exposure_s();
  seq.seed = seed;
  seq.spec = spec;
  const double tau = spec.exposure_s();
  const double eta = spec.eta();

  parallel_for(0, n_frames, [&](int64_t f) {
    const FluxImage warped = warp_flux(flux, trajectory, seq.frame_mid_time(static_cast<int>(f)));
    auto& buf = seq.packed_frame(static_cast<int>(f));
    for (int y = 0; y < flux.height; ++y) {
      RngStream rng = row_stream(seed, f, y);
      const size_t row0 = static_cast<size_t>(y) * flux.width;
      for (int x = 0; x < flux.width; ++x) {
        const double dark = dcr_map ? dcr_map->dcr_cps.at(x, y) : spec.dark_rate;
        const double lambda = warped.at(x, y) * tau * eta + dark * tau;
        const double p = -std::expm1(-lambda);
        if (rng.uniform() < p) {
          const size_t bit = row0 + x;
          buf[bit >> 3] |= static_cast<uint8_t>(1u << (bit & 7));
        }
      }
    }
  });
  return seq;
}

FrameSequence sample_jot_sequence(const FluxImage& flux, const SensorSpec& spec,
                                  const MotionTrajectory& trajectory, int n_frames,
                                  int oversample_factor, uint64_t seed) {
  spec.validate();
  if (spec.kind != SensorKind::Jot) throw std::invalid_argument("sample_jot_sequence needs a jot spec");
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  const int k = oversample_factor;
  if (k < 1) throw std::invalid_argument("oversample factor must be >= 1");
  if (flux.width % k != 0 || flux.height % k != 0)
    throw std::invalid_argument("oversample factor must divide flux dimensions");

  const int jot_max = (1 << spec.bit_depth) - 1;
  const int box_max = k * k * jot_max;
  int out_bits = 1;
  while ((1 << out_bits) - 1 < box_max) ++out_bits;
  if (out_bits > 16) throw std::invalid_argument("oversample factor too large for 16-bit frames");

  FrameSequence seq(flux.width / k, flux.height / k, n_frames, out_bits);
  seq.frame_period_s = spec.exposure_s();
  seq.exposure_s = spec.exposure_s();
  seq.seed = seed;
  seq.spec = spec;
  seq.extra_metadata = "jot_oversample=" + std::to_string(k) + "\n";
  const double tau = spec.exposure_s();
  const double eta = spec.eta();

  parallel_for(0, n_frames, [&](int64_t f) {
    const FluxImage warped = warp_flux(flux, trajectory, seq.frame_mid_time(static_cast<int>(f)));
    // Jot rows are the RNG granularity (full-resolution rows). Box sums are
    // accumulated out-of-place because a k == 1, 1-bit output is bit-packed.
    std::vector<int> box(static_cast<size_t>(seq.width()) * seq.height(), 0);
    for (int jy = 0; jy < flux.height; ++jy) {
      RngStream rng = row_stream(seed, f, jy);
      const size_t orow = static_cast<size_t>(jy / k) * seq.width();
      for (int jx = 0; jx < flux.width; ++jx) {
        const double lam = warped.at(jx, jy) * tau * eta + spec.dark_rate * tau;
        double v = static_cast<double>(rng.poisson(lam));
        if (spec.read_noise_e > 0.0) v += spec.read_noise_e * rng.normal();
        const auto q = static_cast<int>(std::lround(v));
        box[orow + jx / k] += std::clamp(q, 0, jot_max);
      }
    }
    if (seq.binary()) {
      for (int y = 0; y < seq.height(); ++y)
        for (int x = 0; x < seq.width(); ++x)
          seq.set(static_cast<int>(f), x, y, box[static_cast<size_t>(y) * seq.width() + x]);
    } else {
      auto& out = seq.wide_frame(static_cast<int>(f));
      for (size_t i = 0; i < box.size(); ++i) out[i] = static_cast<int16_t>(box[i]);
    }
  });
  return seq;
}

Image<double> jot_normalized(const FrameSequence& seq, int frame, int oversample_factor,
                             int jot_bit_depth) {
  const double denom = static_cast<double>(oversample_factor) * oversample_factor *
                       ((1 << jot_bit_depth) - 1);
  Image<double> out(seq.width(), seq.height());
  for (int y = 0; y < seq.height(); ++y)
    for (int x = 0; x < seq.width(); ++x) out.at(x, y) = seq.get(frame, x, y) / denom;
  return out;
}

FrameSequence emulate_conventional_burst(const FluxImage& flux, const SensorSpec& spec,
                                         const MotionTrajectory& trajectory,
                                         const ExposurePlan& plan, uint64_t seed) {
  spec.validate();
  if (spec.kind != SensorKind::Conventional)
    throw std::invalid_argument("emulate_conventional_burst needs a conventional spec");
  if (plan.n_frames <= 0 || !(plan.total_exposure_s > 0.0))
    throw std::invalid_argument("invalid exposure plan");

  const double tau = plan.total_exposure_s / plan.n_frames;
  const double eta = spec.eta();
  const int adc_max = (1 << spec.bit_depth) - 1;
  const int clamp_max = std::min<int>(adc_max, static_cast<int>(spec.full_well_e) - 1);

  FrameSequence seq(flux.width, flux.height, plan.n_frames, spec.bit_depth);
  seq.frame_period_s = tau;
  seq.exposure_s = tau;
  seq.seed = seed;
  seq.spec = spec;

  parallel_for(0, plan.n_frames, [&](int64_t f) {
    const FluxImage warped = warp_flux(flux, trajectory, seq.frame_mid_time(static_cast<int>(f)));
    auto& out = seq.wide_frame(static_cast<int>(f));
    for (int y = 0; y < flux.height; ++y) {
      RngStream rng = row_stream(seed, f, y);
      for (int x = 0; x < flux.width; ++x) {
        double v = static_cast<double>(rng.poisson(warped.at(x, y) * tau * eta));
        v += static_cast<double>(rng.poisson(spec.dark_rate * tau));
        if (spec.read_noise_e > 0.0) v += spec.read_noise_e * rng.normal();
        // Quantize and clamp at the top only: negative read-noise excursions
        // survive (black-level-subtracted convention), as the closed-form
        // estimator variance requires. Narrow ADCs (<= 8 bit) cannot carry
        // sign on disk and are floored at zero.
        const auto q = static_cast<int>(std::lround(v));
        const int lo = spec.bit_depth > 8 ? INT16_MIN : 0;
        out[static_cast<size_t>(y) * flux.width + x] =
            static_cast<int16_t>(std::clamp(q, lo, clamp_max));
      }
    }
  });
  return seq;
}

ExposurePlan plan_exposure(double phi_mean, double v, const SensorSpec& spec, double c_t,
                           double m_max, double m_f) {
  spec.validate();
  if (!(c_t > 0.0) || !(m_max > 0.0) || !(m_f > 0.0))
    throw std::invalid_argument("plan targets must be positive");
  if (!(phi_mean >= 0.0) || !(v >= 0.0)) throw std::invalid_argument("phi and v must be >= 0");
  if (phi_mean == 0.0 && v == 0.0)
    throw std::invalid_argument("unbounded exposure: zero flux and zero motion");

  double T;
  if (v == 0.0) {
    T = c_t / phi_mean;
  } else if (phi_mean == 0.0) {
    T = m_max / v;
  } else {
    T = std::min(c_t / phi_mean, m_max / v);
  }

  ExposurePlan plan;
  plan.total_exposure_s = T;
  plan.target_count = c_t;
  plan.max_total_motion_px = m_max;
  plan.max_per_frame_motion_px = m_f;
  plan.apparent_speed_px_per_s = v;
  plan.mean_flux = phi_mean;
  if (spec.kind == SensorKind::Conventional) {
    plan.n_frames = std::max(1, static_cast<int>(std::ceil(v * T / m_f)));
  } else {
    const double n = std::floor(T * spec.frame_rate_fps);
    if (n < 1.0) throw std::invalid_argument("planned exposure is shorter than one quanta frame");
    plan.n_frames = static_cast<int>(std::min(n, 2.0e9));
  }
  return plan;
}

DcrMap build_dcr_map(const FrameSequence& dark_sequence, double hot_threshold_cps) {
  if (!(hot_threshold_cps > 0.0)) throw std::invalid_argument("hot threshold must be > 0");
  const SumImage sum = sum_all_frames(dark_sequence);
  const int n = sum.n_frames_summed;
  const double tau = dark_sequence.exposure_s > 0.0 ? dark_sequence.exposure_s
                                                    : dark_sequence.frame_period_s;
  if (!(tau > 0.0)) throw std::invalid_argument("dark sequence has no exposure time");

  DcrMap map;
  map.dcr_cps = Image<double>(sum.counts.width, sum.counts.height);
  map.hot_mask = Image<uint8_t>(sum.counts.width, sum.counts.height, 0);
  for (int y = 0; y < sum.counts.height; ++y) {
    for (int x = 0; x < sum.counts.width; ++x) {
      const int32_t s = sum.counts.at(x, y);
      const bool every_frame = s >= n;
      const double s_eff = every_frame ? n - 1.0 : static_cast<double>(s);
      const double dcr = -std::log1p(-s_eff / n) / tau;
      map.dcr_cps.at(x, y) = dcr;
      map.hot_mask.at(x, y) = (every_frame || dcr > hot_threshold_cps) ? 1 : 0;
    }
  }
  return map;
}

}  // namespace qbp
