#include "qbp/reconstruct.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qbp/parallel.hpp"
#include "qbp/rng.hpp"

namespace qbp {

FrameSequence correct_hot_pixels(const FrameSequence& seq, const DcrMap& map, uint64_t seed,
                                 int* n_unfixable) {
  if (map.hot_mask.width != seq.width() || map.hot_mask.height != seq.height())
    throw std::invalid_argument("correct_hot_pixels: mask dimensions must match frames");
  const int w = seq.width();
  const int h = seq.height();

  // Pixels whose whole neighborhood is masked stay fixed at 0.
  int unfixable = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!map.hot_mask.at(x, y)) continue;
      bool any = false;
      for (int dy = -1; dy <= 1 && !any; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          if (!map.hot_mask.at(nx, ny)) {
            any = true;
            break;
          }
        }
      if (!any) ++unfixable;
    }
  if (n_unfixable) *n_unfixable = unfixable;

  FrameSequence out = seq;
  parallel_for(0, seq.n_frames(), [&](int64_t f) {
    std::array<std::array<int, 2>, 8> nbr;
    for (int y = 0; y < h; ++y) {
      RngStream stream = row_stream(seed, f, y);
      for (int x = 0; x < w; ++x) {
        if (!map.hot_mask.at(x, y)) continue;
        int k = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            if (map.hot_mask.at(nx, ny)) continue;
            nbr[static_cast<size_t>(k++)] = {nx, ny};
          }
        if (k == 0) {
          out.set(static_cast<int>(f), x, y, 0);
          continue;
        }
        const auto& pick = nbr[static_cast<size_t>(stream.next_u64() % static_cast<uint64_t>(k))];
        out.set(static_cast<int>(f), x, y, seq.get(static_cast<int>(f), pick[0], pick[1]));
      }
    }
  });
  return out;
}

double anscombe_value(double x) {
  if (x < 0) throw std::domain_error("anscombe: negative input");
  return 2.0 * std::sqrt(x + 0.375);
}

double inverse_anscombe_value(double y) {
  const double x = 0.25 * y * y - 0.375;
  return x > 0 ? x : 0.0;
}

Image<double> anscombe(const Image<double>& counts) {
  Image<double> out(counts.width, counts.height, 0.0);
  for (size_t i = 0; i < counts.data.size(); ++i) out.data[i] = anscombe_value(counts.data[i]);
  return out;
}

Image<double> inverse_anscombe(const Image<double>& stabilized) {
  Image<double> out(stabilized.width, stabilized.height, 0.0);
  for (size_t i = 0; i < stabilized.data.size(); ++i)
    out.data[i] = inverse_anscombe_value(stabilized.data[i]);
  return out;
}

namespace {

/// Negative binomial log-likelihood of one pixel, constant terms dropped:
/// -s*log(1 - exp(-lam)) + (n - s)*lam, lam = flux*tau*eta + dark*tau.
double pixel_nll(double flux, double s, double n, double tau, double eta, double dark) {
  const double lam = flux * tau * eta + dark * tau;
  double nll = (n - s) * lam;
  if (s > 0) {
    const double p1 = -std::expm1(-lam);
    nll -= s * std::log(std::max(p1, 1e-300));
  }
  return nll;
}

double pixel_nll_grad(double flux, double s, double n, double tau, double eta, double dark) {
  const double lam = std::max(flux * tau * eta + dark * tau, 1e-12);
  const double p1 = -std::expm1(-lam);
  const double ratio = std::exp(-lam) / p1;
  return tau * eta * ((n - s) - s * ratio);
}

double total_variation(const Image<double>& x) {
  double tv = 0;
  for (int j = 0; j < x.height; ++j)
    for (int i = 0; i < x.width; ++i) {
      if (i + 1 < x.width) tv += std::abs(x.at(i + 1, j) - x.at(i, j));
      if (j + 1 < x.height) tv += std::abs(x.at(i, j + 1) - x.at(i, j));
    }
  return tv;
}

/// prox of gamma*TV via dual projected gradient (anisotropic TV, forward
/// differences, Neumann boundary).
Image<double> prox_tv(const Image<double>& z, double gamma, int inner_iters) {
  if (gamma <= 0) return z;
  const int w = z.width;
  const int h = z.height;
  Image<double> p(w, h, 0.0), q(w, h, 0.0), u(w, h, 0.0);
  auto rebuild_u = [&] {
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        double div = p.at(i, j) + q.at(i, j);
        if (i > 0) div -= p.at(i - 1, j);
        if (j > 0) div -= q.at(i, j - 1);
        u.at(i, j) = z.at(i, j) + gamma * div;
      }
  };
  const double step = 1.0 / (8.0 * gamma);
  for (int it = 0; it < inner_iters; ++it) {
    rebuild_u();
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        if (i + 1 < w)
          p.at(i, j) = std::clamp(p.at(i, j) + step * (u.at(i + 1, j) - u.at(i, j)), -1.0, 1.0);
        if (j + 1 < h)
          q.at(i, j) = std::clamp(q.at(i, j) + step * (u.at(i, j + 1) - u.at(i, j)), -1.0, 1.0);
      }
  }
  rebuild_u();
  return u;
}

}  // namespace

double tv_objective(const SumImage& sum, const SensorSpec& spec, const FluxImage& flux,
                    double lambda_tv) {
  require_same_shape(sum.counts, flux, "tv_objective");
  const double n = static_cast<double>(sum.n_frames_summed);
  const double tau = spec.exposure_s();
  const double eta = spec.eta();
  double nll = 0;
  for (size_t i = 0; i < flux.data.size(); ++i) {
    const double s = std::min(static_cast<double>(sum.counts.data[i]), n - 1.0);
    nll += pixel_nll(flux.data[i], s, n, tau, eta, spec.dark_rate);
  }
  return nll + lambda_tv * total_variation(flux);
}

FluxImage tv_denoise(const SumImage& sum, const SensorSpec& spec, double lambda_tv, int iters) {
  if (lambda_tv < 0) throw std::invalid_argument("lambda_tv must be >= 0");
  if (iters < 0) throw std::invalid_argument("iters must be >= 0");
  MleResult init = mle_flux(sum, spec);
  if (lambda_tv == 0) return std::move(init.flux);

  const double n = static_cast<double>(sum.n_frames_summed);
  const double tau = spec.exposure_s();
  const double eta = spec.eta();
  const int w = sum.counts.width;
  const int h = sum.counts.height;

  Image<double> s_clipped(w, h, 0.0);
  for (size_t i = 0; i < s_clipped.data.size(); ++i)
    s_clipped.data[i] = std::min(static_cast<double>(sum.counts.data[i]), n - 1.0);

  FluxImage x = std::move(init.flux);
  double fx = tv_objective(sum, spec, x, lambda_tv);
  double alpha = 1.0 / (tau * eta * tau * eta * n);
  Image<double> grad(w, h, 0.0);

  for (int it = 0; it < iters; ++it) {
    for (size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] = pixel_nll_grad(x.data[i], s_clipped.data[i], n, tau, eta, spec.dark_rate);

    bool accepted = false;
    bool converged = false;
    while (alpha > 1e-30) {
      Image<double> cand(w, h, 0.0);
      for (size_t i = 0; i < cand.data.size(); ++i) cand.data[i] = x.data[i] - alpha * grad.data[i];
      cand = prox_tv(cand, alpha * lambda_tv, 40);
      for (auto& v : cand.data) v = std::max(v, 0.0);
      const double fc = tv_objective(sum, spec, cand, lambda_tv);
      if (fc <= fx) {
        // Ties (fc == fx) are accepted so flat directions can still be
        // traversed, but a vanishing step means we are at a fixed point; stop
        // there instead of letting the growing step amplify gradient roundoff.
        double step_inf = 0.0, x_inf = 0.0;
        for (size_t i = 0; i < cand.data.size(); ++i) {
          step_inf = std::max(step_inf, std::abs(cand.data[i] - x.data[i]));
          x_inf = std::max(x_inf, std::abs(x.data[i]));
        }
        converged = step_inf <= 1e-13 * (x_inf + 1.0);
        x = std::move(cand);
        fx = fc;
        alpha = std::min(alpha * 2.0, 1e30);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || converged) break;  // no useful step at machine precision
  }
  return x;
}

FinalImage finalize_image(const MergedImage& merged, const SensorSpec& spec, double gamma,
                          const Denoiser& denoiser, double percentile) {
  if (merged.effective_frames <= 0)
    throw std::invalid_argument("finalize_image: effective_frames must be > 0");
  if (gamma <= 0) throw std::invalid_argument("finalize_image: gamma must be > 0");
  if (percentile <= 0 || percentile > 100)
    throw std::invalid_argument("finalize_image: percentile must be in (0, 100]");

  Image<double> counts = merged.counts;
  if (denoiser) counts = inverse_anscombe(denoiser(anscombe(counts)));

  const int w = counts.width;
  const int h = counts.height;
  FinalImage out;
  out.flux = FluxImage(w, h, 0.0);
  out.saturated = Image<uint8_t>(w, h, uint8_t{0});
  parallel_for(0, h, [&](int64_t y) {
    for (int x = 0; x < w; ++x) {
      bool sat = false;
      out.flux.at(x, static_cast<int>(y)) =
          flux_from_counts(counts.at(x, static_cast<int>(y)), merged.effective_frames,
                           spec.exposure_s(), spec.eta(), spec.dark_rate, &sat);
      if (sat) out.saturated.at(x, static_cast<int>(y)) = 1;
    }
  });

  // Percentile by linear interpolation on the sorted values.
  std::vector<double> sorted = out.flux.data;
  std::sort(sorted.begin(), sorted.end());
  const double rank = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  const double norm = lo + 1 < sorted.size()
                          ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                          : sorted[lo];
  out.normalization = norm;

  out.display = Image<double>(w, h, 0.0);
  if (norm > 0) {
    const double inv_gamma = 1.0 / gamma;
    for (size_t i = 0; i < out.display.data.size(); ++i)
      out.display.data[i] = std::pow(std::clamp(out.flux.data[i] / norm, 0.0, 1.0), inv_gamma);
  }
  return out;
}

Denoiser gaussian_denoiser(double sigma) {
  if (sigma <= 0) {
    return [](const Image<double>& img) { return img; };
  }
  return [sigma](const Image<double>& img) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double ksum = 0;
    for (int i = -radius; i <= radius; ++i) {
      kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
      ksum += kernel[static_cast<size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    Image<double> tmp(img.width, img.height, 0.0);
    parallel_for(0, img.height, [&](int64_t y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 img.at_clamped(x + i, static_cast<int>(y));
        tmp.at(x, static_cast<int>(y)) = acc;
      }
    });
    Image<double> outimg(img.width, img.height, 0.0);
    parallel_for(0, img.height, [&](int64_t y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp.at_clamped(x, static_cast<int>(y) + i);
        outimg.at(x, static_cast<int>(y)) = acc;
      }
    });
    return outimg;
  };
}

}  // namespace qbp
