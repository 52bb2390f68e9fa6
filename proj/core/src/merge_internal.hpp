#pragma once

#include <complex>
#include <vector>

#include "qbp/image.hpp"

namespace qbp::detail {

// Overlapped tile decomposition with an analysis window whose shifted copies
// sum to exactly 1, so unprocessed content survives overlap-add unchanged.
struct TilePlan {
  int tile = 0;
  int stride = 0;
  bool windowed = false;
  std::vector<int> xs, ys;    // tile top-left corners (reads are clamped)
  std::vector<double> win1d;    // separable analysis window
  double spectral_scale = 0;    // tile pixel count: per-pixel variance -> spectral power

  int count() const { return static_cast<int>(xs.size() * ys.size()); }
};

TilePlan make_tile_plan(int width, int height, int tile, double overlap);

/// Kernel-regression anisotropic stretch from structure-tensor eigenvalues:
/// A = 1 + min(sqrt(l1/l2), cap), with l2 floored to keep the ratio finite.
double kernel_anisotropy(double l1, double l2, double cap);

/// Windowed, border-clamped tile of img -> forward 2-D FFT spectrum
/// (buf holds tile*tile complex values, row-major).
void tile_spectrum(const Image<double>& img, const TilePlan& plan, int tx, int ty,
                   std::complex<double>* buf);

std::vector<std::vector<std::complex<double>>> all_tile_spectra(const Image<double>& img,
                                                                const TilePlan& plan);

/// Per tile, per frequency: F = Aux + A*(Ref - Aux) with
/// A = |D|^2/(|D|^2 + c_sigma2), D = Ref - Aux; inverse FFT, overlap-add.
/// Tiles are processed in parallel but accumulated in tile order, so the
/// result is independent of the thread count.
Image<double> wiener_blend(const Image<double>& aux,
                           const std::vector<std::vector<std::complex<double>>>& ref_spectra,
                           const TilePlan& plan, double c_sigma2);

}  // namespace qbp::detail
