#pragma once

#include "qbp/image.hpp"
#include "qbp/sensor.hpp"

namespace qbp {

/// Mean detections per binary frame: lambda = phi*tau*eta + dark_rate*tau.
double frame_lambda(double flux, double exposure_s, double eta, double dark_cps);

/// Probability a binary frame fires: P{B=1} = 1 - exp(-lambda).
/// Errors on negative flux/exposure or eta outside (0, 1].
double detection_probability(double flux, double exposure_s, double eta, double dark_cps);

/// Expected n-frame sum  E[S] = n * (1 - exp(-lambda)).  Strictly below n for
/// finite flux: the binary sensor saturates softly.
double expected_sum(double flux, int n_frames, double exposure_s, double eta, double dark_cps);

struct MleResult {
  FluxImage flux;              // photons/pixel/second, clamped at 0
  Image<uint8_t> saturated;    // 1 where S reached n and was clipped to n-1
};

/// Maximum-likelihood flux from a real-valued count total over n frames:
///   phi = -ln(1 - S/n) / (tau*eta) - dark/eta
/// Saturated counts (S >= n) are clipped to n-1 and flagged via *saturated.
double flux_from_counts(double counts, double n_frames, double exposure_s, double eta,
                        double dark_cps, bool* saturated = nullptr);

/// Per-pixel MLE inversion of a binary-frame sum image.
MleResult mle_flux(const SumImage& sum, const SensorSpec& spec);

/// Log of the binomial likelihood of observing s ones in n frames at flux phi:
///   log C(n,s) + s*log(1 - p0) + (n-s)*log(p0),   p0 = exp(-lambda).
double binomial_log_likelihood(double flux, int s, int n_frames, double exposure_s, double eta,
                               double dark_cps);

/// Cramer-Rao bound on flux estimation from an n-frame binary sum:
///   rmse = sqrt((exp(lambda) - 1) / (n * tau^2 * eta^2)).
double fisher_rmse_quanta(double flux, int n_frames, double exposure_s, double eta, double dark_cps);

/// RMSE of the averaged conventional estimator over n frames of exposure tau:
///   sqrt((phi*eta + dark)/(T*eta^2) + n*sigma_read^2/(T^2*eta^2)),  T = n*tau.
double rmse_conventional(double flux, int n_frames, double exposure_s, double eta, double dark_rate,
                         double read_noise_e);

/// Averaged (dark-subtracted) conventional flux estimate from a burst total:
///   phi = (sum - n*tau*dark) / (n*tau*eta).
double conventional_flux_estimate(double counts_sum, int n_frames, double exposure_s, double eta,
                                  double dark_rate);

struct ResponsePoint {
  double flux = 0.0;
  double expected_per_frame = 0.0;  // mean detected signal per frame
};

/// Mean per-frame response sampled at the given flux values.
/// Binary sensors: 1 - exp(-lambda) (soft saturation, asymptote 1).
/// Conventional:   min(phi*tau*eta, full_well - 1) (hard clamp).
std::vector<ResponsePoint> response_curve_samples(const SensorSpec& spec,
                                                  const std::vector<double>& flux_values);

}  // namespace qbp
