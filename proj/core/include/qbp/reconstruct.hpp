#pragma once

#include <cstdint>
#include <functional>

#include "qbp/frame_sequence.hpp"
#include "qbp/image.hpp"
#include "qbp/merge.hpp"
#include "qbp/model.hpp"
#include "qbp/sensor.hpp"
#include "qbp/simulate.hpp"

namespace qbp {

/// Spatial denoiser plug-in operating on a variance-stabilized image.
using Denoiser = std::function<Image<double>(const Image<double>&)>;

/// Replaces every masked pixel, in every frame, with the value of one of its
/// in-bounds non-masked 8-neighbors chosen uniformly at random (deterministic
/// given the seed). Non-masked pixels are copied bit-exactly. A masked pixel
/// with no usable neighbor becomes 0; n_unfixable (optional) receives the
/// count of such pixels.
FrameSequence correct_hot_pixels(const FrameSequence& seq, const DcrMap& map, uint64_t seed,
                                 int* n_unfixable = nullptr);

/// Variance-stabilizing transform y = 2*sqrt(x + 3/8) and its algebraic
/// inverse x = (y/2)^2 - 3/8 clamped at 0. Negative input -> domain error.
double anscombe_value(double x);
double inverse_anscombe_value(double y);
Image<double> anscombe(const Image<double>& counts);
Image<double> inverse_anscombe(const Image<double>& stabilized);

/// Joint reconstruction-denoising objective: negative binomial log-likelihood
/// of the flux field given the summed counts plus lambda_tv times the
/// anisotropic total variation (forward differences). Counts are clipped to
/// n-1 where saturated.
double tv_objective(const SumImage& sum, const SensorSpec& spec, const FluxImage& flux,
                    double lambda_tv);

/// Minimizes tv_objective by proximal-gradient iteration (gradient step on
/// the likelihood, anisotropic-TV proximal step by dual projection). The
/// objective never increases across an accepted iteration; a step that fails
/// to decrease it is halved. lambda_tv = 0 returns the per-pixel MLE.
FluxImage tv_denoise(const SumImage& sum, const SensorSpec& spec, double lambda_tv, int iters);

struct FinalImage {
  FluxImage flux;              // linear MLE flux (photons/s)
  Image<double> display;       // [0,1], percentile-normalized, gamma-encoded
  Image<uint8_t> saturated;    // 1 where counts reached effective_frames
  double normalization = 0.0;  // flux value mapped to display 1.0
};

/// Converts merged counts to a display-ready image: optional Anscombe ->
/// denoiser -> inverse chain, per-pixel MLE inversion with
/// n = effective_frames, normalization of the given flux percentile to 1.0,
/// and power 1/gamma encoding.
FinalImage finalize_image(const MergedImage& merged, const SensorSpec& spec, double gamma = 2.2,
                          const Denoiser& denoiser = nullptr, double percentile = 99.9);

/// Reference plug-in: separable Gaussian blur (sigma <= 0: identity).
Denoiser gaussian_denoiser(double sigma);

}  // namespace qbp
