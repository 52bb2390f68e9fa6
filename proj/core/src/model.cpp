#include "qbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qbp/parallel.hpp"

namespace qbp {

namespace {

void check_physical(double flux, double exposure_s, double eta, double dark) {
  if (!(flux >= 0.0) || !std::isfinite(flux)) throw std::invalid_argument("flux must be finite and >= 0");
  if (!(exposure_s > 0.0)) throw std::invalid_argument("exposure must be > 0");
  if (!(eta > 0.0) || eta > 1.0) throw std::invalid_argument("efficiency must be in (0, 1]");
  if (!(dark >= 0.0)) throw std::invalid_argument("dark rate must be >= 0");
}

}  // namespace

double frame_lambda(double flux, double exposure_s, double eta, double dark_cps) {
  check_physical(flux, exposure_s, eta, dark_cps);
  return flux * exposure_s * eta + dark_cps * exposure_s;
}

double detection_probability(double flux, double exposure_s, double eta, double dark_cps) {
  // -expm1(-x) = 1 - exp(-x) without cancellation at small x.
  return -std::expm1(-frame_lambda(flux, exposure_s, eta, dark_cps));
}

double expected_sum(double flux, int n_frames, double exposure_s, double eta, double dark_cps) {
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  return n_frames * detection_probability(flux, exposure_s, eta, dark_cps);
}

double flux_from_counts(double counts, double n_frames, double exposure_s, double eta,
                        double dark_cps, bool* saturated) {
  check_physical(0.0, exposure_s, eta, dark_cps);
  if (!(n_frames > 0.0)) throw std::invalid_argument("n_frames must be > 0");
  if (counts < 0.0) throw std::invalid_argument("counts must be >= 0");
  bool sat = false;
  if (counts >= n_frames) {  // log argument would hit 0; clip to the largest invertible count
    counts = n_frames - 1.0;
    sat = true;
    if (counts < 0.0) counts = 0.0;
  }
  if (saturated) *saturated = sat;
  const double phi = -std::log1p(-counts / n_frames) / (exposure_s * eta) - dark_cps / eta;
  return phi > 0.0 ? phi : 0.0;
}

MleResult mle_flux(const SumImage& sum, const SensorSpec& spec) {
  spec.validate();
  const int n = sum.n_frames_summed;
  if (n <= 0) throw std::invalid_argument("mle_flux: sum has no frames");
  MleResult out;
  out.flux = FluxImage(sum.counts.width, sum.counts.height);
  out.saturated = Image<uint8_t>(sum.counts.width, sum.counts.height, 0);
  const double tau = spec.exposure_s();
  const double eta = spec.eta();
  const double dark = spec.dark_rate;
  parallel_for(0, sum.counts.height, [&](int64_t y) {
    for (int x = 0; x < sum.counts.width; ++x) {
      const int32_t s = sum.counts.at(x, static_cast<int>(y));
      if (s < 0) throw std::invalid_argument("mle_flux: negative count");
      bool sat = false;
      out.flux.at(x, static_cast<int>(y)) =
          flux_from_counts(static_cast<double>(s), static_cast<double>(n), tau, eta, dark, &sat);
      out.saturated.at(x, static_cast<int>(y)) = sat ? 1 : 0;
    }
  });
  return out;
}

double binomial_log_likelihood(double flux, int s, int n_frames, double exposure_s, double eta,
                               double dark_cps) {
  if (n_frames <= 0 || s < 0 || s > n_frames) throw std::invalid_argument("invalid (s, n)");
  const double lambda = frame_lambda(flux, exposure_s, eta, dark_cps);
  const double log_p0 = -lambda;
  const double log_p1 = std::log(-std::expm1(-lambda));
  const double log_choose = std::lgamma(n_frames + 1.0) - std::lgamma(s + 1.0) -
                            std::lgamma(n_frames - s + 1.0);
  double ll = log_choose + (n_frames - s) * log_p0;
  if (s > 0) ll += s * log_p1;  // s = 0 avoids log(0) at zero lambda
  return ll;
}

double fisher_rmse_quanta(double flux, int n_frames, double exposure_s, double eta,
                          double dark_cps) {
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  const double lambda = frame_lambda(flux, exposure_s, eta, dark_cps);
  const double te = exposure_s * eta;
  return std::sqrt(std::expm1(lambda) / (n_frames * te * te));
}

double rmse_conventional(double flux, int n_frames, double exposure_s, double eta, double dark_rate,
                         double read_noise_e) {
  check_physical(flux, exposure_s, eta, dark_rate);
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  if (!(read_noise_e >= 0.0)) throw std::invalid_argument("read noise must be >= 0");
  const double T = n_frames * exposure_s;
  const double shot_dark = (flux * eta + dark_rate) / (T * eta * eta);
  const double read = n_frames * read_noise_e * read_noise_e / (T * T * eta * eta);
  return std::sqrt(shot_dark + read);
}

double conventional_flux_estimate(double counts_sum, int n_frames, double exposure_s, double eta,
                                  double dark_rate) {
  check_physical(0.0, exposure_s, eta, dark_rate);
  if (n_frames <= 0) throw std::invalid_argument("n_frames must be > 0");
  return (counts_sum - n_frames * exposure_s * dark_rate) / (n_frames * exposure_s * eta);
}

std::vector<ResponsePoint> response_curve_samples(const SensorSpec& spec,
                                                  const std::vector<double>& flux_values) {
  spec.validate();
  std::vector<ResponsePoint> out;
  out.reserve(flux_values.size());
  for (const double phi : flux_values) {
    ResponsePoint pt;
    pt.flux = phi;
    if (spec.kind == SensorKind::Conventional) {
      const double mean_e = phi * spec.exposure_s() * spec.eta();
      pt.expected_per_frame = std::min(mean_e, spec.full_well_e - 1.0);
    } else {
      pt.expected_per_frame = detection_probability(phi, spec.exposure_s(), spec.eta(), spec.dark_rate);
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace qbp
